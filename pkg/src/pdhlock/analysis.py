"""Report builders shared by the CLI and the HTTP service.

Everything that leaves the library as JSON is assembled here so the two
front ends cannot drift apart.
"""

from __future__ import annotations

import warnings
from dataclasses import fields as dataclass_fields

from .config import ProjectConfig, project_to_dict
from .loop import (
    MarginsReport,
    analysis_band,
    assemble_open_loop,
    closed_loop_psd,
    closed_loop_trace,
    margins,
)
from .noise import beta_separation_linewidth, noise_model_psd
from .pdh import effective_ke
from .serialize import psd_to_dict, to_jsonable, trace_to_dict
from .transfer import CavityPole, bode_grid
from .tuning import TunePolicy, TuneResult

__all__ = [
    "margins_to_dict",
    "tune_result_to_dict",
    "tune_policy_from_dict",
    "evaluate_project",
    "SCHEMA_VERSION",
]

SCHEMA_VERSION = 1

DEFAULT_GRID = {"f_min_Hz": 10.0, "f_max_Hz": 10e6, "points_per_decade": 100}


def margins_to_dict(rep: MarginsReport) -> dict:
    return {
        "f_ug_Hz": rep.f_ug,
        "phi_m_deg": rep.phi_m_deg,
        "f_180_Hz": rep.f_180,
        "g_m": rep.g_m,
        "f_bump_Hz": rep.f_bump,
        "stable": rep.stable,
        "goal_flags": rep.goal_flags(),
        "warnings": list(rep.warnings),
    }


def tune_result_to_dict(res: TuneResult) -> dict:
    return {
        "k_p": res.k_p,
        "f_i_Hz": res.f_i,
        "f_d_Hz": res.f_d,
        "f_i_slow_Hz": res.f_i_slow,
        "margins": margins_to_dict(res.margins),
        "iterations": res.iterations,
        "infeasible": res.infeasible,
        "binding_constraint": res.binding_constraint,
        "trace": [
            {
                "action": s.action,
                "parameter": s.parameter,
                "value": s.value,
                "verdict": s.verdict,
                "f_ug_Hz": s.f_ug,
            }
            for s in res.trace
        ],
    }


_POLICY_KEYMAP = {"f_min_Hz": "f_min", "f_max_Hz": "f_max"}


def tune_policy_from_dict(d: dict | None) -> TunePolicy:
    if not d:
        return TunePolicy()
    known = {f.name for f in dataclass_fields(TunePolicy)}
    kw = {}
    for key, value in d.items():
        name = _POLICY_KEYMAP.get(key, key)
        if name not in known:
            raise ValueError(f"unknown tune policy field {key!r}")
        kw[name] = value
    return TunePolicy(**kw)


def evaluate_project(
    pc: ProjectConfig,
    f_min: float = 10.0,
    f_max: float = 10e6,
    points_per_decade: int = 100,
    branch: str = "both",
) -> dict:
    """One-shot analysis of a project: open/closed-loop traces, margins,
    predicted locked PSD, and linewidth estimates."""
    model = assemble_open_loop(pc.loop, branch)
    f_min, f_max = analysis_band(pc.loop, f_min, f_max)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha = bode_grid(model, f_min, f_max, points_per_decade, label="alpha")
        rep = margins(alpha)
        closed = closed_loop_trace(alpha)

    psd_doc = None
    linewidth_doc = None
    if pc.noise is not None:
        noise = pc.noise
        k_e = effective_ke(pc.loop.discriminator)
        cavity = CavityPole(pc.loop.discriminator.delta_nu_c)
        s_y1 = closed_loop_psd(
            alpha,
            lambda f: noise_model_psd(noise, f),
            pc.s_n4_v2_per_hz,
            k_e,
            cavity,
        )
        locked = beta_separation_linewidth(s_y1)
        free = beta_separation_linewidth(noise, f_high=f_max)
        psd_doc = psd_to_dict(s_y1)
        linewidth_doc = {
            "locked_fwhm_Hz": locked.fwhm_hz,
            "free_running_fwhm_Hz": free.fwhm_hz,
        }

    return to_jsonable(
        {
            "schema_version": SCHEMA_VERSION,
            "label": pc.label,
            "branch": branch,
            "margins": margins_to_dict(rep),
            "open_loop": trace_to_dict(alpha),
            "closed_loop": trace_to_dict(closed),
            "psd": psd_doc,
            "linewidth": linewidth_doc,
            "config_echo": project_to_dict(pc),
        }
    )
