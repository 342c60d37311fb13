"""Laser frequency-noise models, linewidth estimation, and spectrum conversion.

Free-running laser noise is modeled as S(f) = h_minus1/f + h0 (Hz^2/Hz,
single-sided).  The linewidth estimate integrates the PSD where it
exceeds the beta-separation line 8*ln(2)*f/pi^2; for pure white noise the
estimate reduces to the Lorentzian FWHM pi*h0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .transfer import TransferModel, log_grid

__all__ = [
    "NoiseModel",
    "PsdTrace",
    "BetaSeparationResult",
    "Sy4ConversionResult",
    "noise_model_psd",
    "beta_separation_line",
    "beta_separation_linewidth",
    "sy4_to_sy1",
    "read_psd_csv",
    "write_psd_csv",
]

_BETA_LINE_COEFF = 8.0 * math.log(2.0) / math.pi**2


@dataclass(frozen=True)
class NoiseModel:
    """Power-law frequency noise: h_minus1/f (flicker) + h0 (white).

    h_minus1 in Hz^2, h0 in Hz^2/Hz; f_low is the lower observation
    cutoff used when integrating the model.
    """

    h_minus1: float
    h0: float
    f_low: float = 10.0

    def __post_init__(self):
        if self.h_minus1 < 0.0 or self.h0 < 0.0:
            raise ValueError("h_minus1 and h0 must be >= 0")
        if self.f_low <= 0.0:
            raise ValueError("f_low must be > 0")


@dataclass
class PsdTrace:
    """Single-sided PSD samples (Hz^2/Hz) on a strictly increasing grid."""

    freqs: np.ndarray
    values: np.ndarray
    resolution_bandwidth: float | None = None
    label: str = ""

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.freqs.shape != self.values.shape or self.freqs.ndim != 1:
            raise ValueError("freqs and values must be 1-D and equal length")
        if np.any(self.freqs <= 0.0) or np.any(np.diff(self.freqs) <= 0.0):
            raise ValueError("freqs must be positive and strictly increasing")
        if np.any(self.values < 0.0):
            raise ValueError("PSD values must be >= 0")

    def __len__(self) -> int:
        return len(self.freqs)


def noise_model_psd(model: NoiseModel, f) -> np.ndarray | float:
    """Evaluate the power-law model at f (Hz); f must be > 0."""
    f = np.asarray(f, dtype=float)
    if np.any(f <= 0.0):
        raise ValueError("f must be > 0")
    out = model.h_minus1 / f + model.h0
    return out if out.ndim else float(out)


def beta_separation_line(f) -> np.ndarray | float:
    """Threshold PSD 8*ln(2)*f/pi^2 separating slow (linewidth-contributing)
    from fast noise."""
    return _BETA_LINE_COEFF * np.asarray(f, dtype=float)


@dataclass(frozen=True)
class BetaSeparationResult:
    """Linewidth estimate: FWHM = sqrt(8*ln2*A) with A the area of the PSD
    above the separation line inside the integration band."""

    fwhm_hz: float
    area_hz2: float
    empty_region: bool


def _masked_area(freqs: np.ndarray, values: np.ndarray) -> float:
    mask = values > beta_separation_line(freqs)
    return float(np.trapezoid(np.where(mask, values, 0.0), freqs))


def beta_separation_linewidth(
    psd: PsdTrace | NoiseModel,
    f_low: float | None = None,
    f_high: float | None = None,
    points_per_decade: int = 400,
) -> BetaSeparationResult:
    """FWHM linewidth from the beta-separation construction.

    Integrates S(f) over the sub-band of [f_low, f_high] where S exceeds
    the separation line.  For a NoiseModel the integrand is sampled on a
    dense log grid (>= 200 points/decade keeps the area error well below
    1%); for a PsdTrace the measured grid is used as-is.  An empty
    integration region falls back to the white-noise Lorentzian pi*h0 for
    models, and to 0 (flagged) for traces.
    """
    if points_per_decade < 200:
        raise ValueError("points_per_decade must be >= 200 for a trustworthy area")
    if isinstance(psd, NoiseModel):
        lo = psd.f_low if f_low is None else f_low
        hi = 1e7 if f_high is None else f_high
        if not lo < hi:
            raise ValueError("need f_low < f_high")
        grid = log_grid(lo, hi, points_per_decade)
        vals = noise_model_psd(psd, grid)
        area = _masked_area(grid, vals)
        if area == 0.0:
            return BetaSeparationResult(math.pi * psd.h0, 0.0, True)
    else:
        lo = psd.freqs[0] if f_low is None else f_low
        hi = psd.freqs[-1] if f_high is None else f_high
        if not lo < hi:
            raise ValueError("need f_low < f_high")
        sel = (psd.freqs >= lo) & (psd.freqs <= hi)
        if np.count_nonzero(sel) < 2:
            raise ValueError("fewer than 2 PSD samples inside [f_low, f_high]")
        area = _masked_area(psd.freqs[sel], psd.values[sel])
        if area == 0.0:
            return BetaSeparationResult(0.0, 0.0, True)
    return BetaSeparationResult(math.sqrt(8.0 * math.log(2.0) * area), area, False)


@dataclass(frozen=True)
class Sy4ConversionResult:
    """Frequency-noise PSD recovered from an RF spectrum, plus the number of
    bins clamped to zero after baseline subtraction."""

    psd: PsdTrace
    clamped_bins: int


def sy4_to_sy1(
    s_y4: PsdTrace,
    omega_over_2pi: float,
    k_e: float,
    pd: TransferModel,
    cavity: TransferModel,
    pd_baseline: PsdTrace | None = None,
) -> Sy4ConversionResult:
    """Convert an RF spectrum around the carrier into laser frequency noise.

    Steps: subtract the detector baseline (negative results clamp to zero
    and are counted), shift the frequency axis by -Omega/2pi, fold the two
    sidebands into a single-sided PSD by summing mirrored bins, and divide
    by |P*k_e*C|^2 to land in Hz^2/Hz.  The lower sideband is interpolated
    onto the upper sideband's offsets, so mildly asymmetric grids are fine
    as long as both sides cover the analysis band.
    """
    if k_e <= 0.0:
        raise ValueError("k_e must be > 0")
    f = s_y4.freqs
    v = s_y4.values.copy()
    if f[0] >= omega_over_2pi or f[-1] <= omega_over_2pi:
        raise ValueError("s_y4 grid must straddle omega_over_2pi")
    clamped = 0
    if pd_baseline is not None:
        if len(pd_baseline) != len(s_y4) or not np.allclose(
            pd_baseline.freqs, f, rtol=1e-9, atol=0.0
        ):
            raise ValueError("pd_baseline must share the s_y4 frequency grid")
        v = v - pd_baseline.values
        neg = v < 0.0
        clamped = int(np.count_nonzero(neg))
        v[neg] = 0.0

    offset = f - omega_over_2pi
    up = offset > 0.0
    dn = offset < 0.0
    f_up = offset[up]
    # Mirror the lower sideband onto positive offsets.
    f_dn = -offset[dn][::-1]
    v_dn = v[dn][::-1]
    band = min(f_up[-1], f_dn[-1])
    sel = f_up <= band
    f_out = f_up[sel]
    folded = v[up][sel] + np.interp(f_out, f_dn, v_dn)
    h = pd.response(f_out) * k_e * cavity.response(f_out)
    values = folded / np.abs(h) ** 2
    psd = PsdTrace(f_out, values, s_y4.resolution_bandwidth, label="s_y1")
    return Sy4ConversionResult(psd, clamped)


# -- CSV interface -----------------------------------------------------------

PSD_CSV_HEADER = "frequency_Hz,psd_Hz2_per_Hz"


def read_psd_csv(path) -> PsdTrace:
    """Read a PSD trace: header 'frequency_Hz,psd_Hz2_per_Hz', '#' comments,
    resolution bandwidth in a '# rbw_Hz=<value>' comment."""
    freqs: list[float] = []
    values: list[float] = []
    rbw: float | None = None
    header_seen = False
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("rbw_Hz="):
                    rbw = float(body.split("=", 1)[1])
                continue
            if not header_seen:
                if [c.strip() for c in line.split(",")] != PSD_CSV_HEADER.split(","):
                    raise ValueError(
                        f"{path}: line {lineno}: expected header '{PSD_CSV_HEADER}'"
                    )
                header_seen = True
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}: line {lineno}: expected 2 columns")
            try:
                freqs.append(float(parts[0]))
                values.append(float(parts[1]))
            except ValueError as exc:
                raise ValueError(f"{path}: line {lineno}: {exc}") from None
    if not header_seen:
        raise ValueError(f"{path}: missing header '{PSD_CSV_HEADER}'")
    return PsdTrace(np.array(freqs), np.array(values), rbw)


def write_psd_csv(path, trace: PsdTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if trace.resolution_bandwidth is not None:
            fh.write(f"# rbw_Hz={trace.resolution_bandwidth!r}\n")
        fh.write(PSD_CSV_HEADER + "\n")
        for f, v in zip(trace.freqs, trace.values):
            fh.write(f"{float(f)!r},{float(v)!r}\n")
