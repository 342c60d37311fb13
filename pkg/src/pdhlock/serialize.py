"""Canonical JSON serialization shared by the CLI and the service.

One code path produces every machine-readable document, so identical
inputs yield byte-identical output wherever they are requested.  Floats
go through repr, the shortest decimal form that round-trips exactly.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

__all__ = ["to_jsonable", "dumps_canonical", "trace_to_dict", "psd_to_dict"]


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays and tuples to JSON types."""
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps_canonical(obj: Any) -> str:
    """Deterministic JSON: sorted keys, compact separators, repr floats."""
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def trace_to_dict(trace) -> dict:
    """BodeTrace as JSON (gain/phase columns, phase unwrapped)."""
    return {
        "label": trace.label,
        "freqs_Hz": trace.freqs,
        "gain_dB": trace.gain_db,
        "phase_deg": trace.phase_deg,
    }


def psd_to_dict(psd) -> dict:
    return {
        "label": psd.label,
        "freqs_Hz": psd.freqs,
        "psd_Hz2_per_Hz": psd.values,
        "rbw_Hz": psd.resolution_bandwidth,
    }
