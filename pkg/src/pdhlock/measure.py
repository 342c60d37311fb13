"""Measured-data ingestion: VNA Bode traces, ring-down decays, and
compensation of measurement chains back to component responses.

CSV schemas are strict (exact headers, no column sniffing) so that
fixtures ingest bit-identically on every platform.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .transfer import BodeTrace, Delay, Tabulated, TransferModel

__all__ = [
    "ParseError",
    "FitError",
    "RingdownTrace",
    "FitReport",
    "GfastResult",
    "BODE_CSV_HEADER",
    "RINGDOWN_CSV_HEADER",
    "parse_bode_csv",
    "write_bode_csv",
    "parse_ringdown_csv",
    "write_ringdown_csv",
    "fit_ringdown",
    "fit_lockin_chain",
    "derive_gfast",
    "fit_pd_order",
]

BODE_CSV_HEADER = "frequency_Hz,gain_dB,phase_deg"
RINGDOWN_CSV_HEADER = "time_s,voltage_V"


class ParseError(ValueError):
    """Malformed measurement file; the message carries the line number."""


class FitError(RuntimeError):
    """A fit did not converge or the data does not support the model."""


def _rows(path, header: str):
    """Yield (lineno, columns) for data rows of a strict-schema CSV."""
    expected = header.split(",")
    header_seen = False
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                yield lineno, None, line
                continue
            if not header_seen:
                if [c.strip() for c in line.split(",")] != expected:
                    raise ParseError(f"{path}: line {lineno}: expected header '{header}'")
                header_seen = True
                continue
            parts = [c.strip() for c in line.split(",")]
            if len(parts) != len(expected):
                raise ParseError(
                    f"{path}: line {lineno}: expected {len(expected)} columns, got {len(parts)}"
                )
            try:
                values = [float(c) for c in parts]
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: non-numeric field") from None
            yield lineno, values, line
    if not header_seen:
        raise ParseError(f"{path}: missing header '{header}'")


def parse_bode_csv(path, label: str = "") -> BodeTrace:
    """Read a VNA export (frequency_Hz,gain_dB,phase_deg; '#' comments).

    Frequencies must be strictly increasing -- duplicates and reversals
    are reported with their line number.  The returned trace's phase is
    unwrapped by continuity, so files with phase wrapped at +-180 degrees
    come out continuous.
    """
    freqs: list[float] = []
    gains: list[float] = []
    phases: list[float] = []
    for lineno, values, _ in _rows(path, BODE_CSV_HEADER):
        if values is None:
            continue
        f, g, p = values
        if freqs:
            if f == freqs[-1]:
                raise ParseError(f"{path}: line {lineno}: duplicate frequency {f:g} Hz")
            if f < freqs[-1]:
                raise ParseError(
                    f"{path}: line {lineno}: frequency not increasing ({f:g} after {freqs[-1]:g})"
                )
        if f <= 0.0:
            raise ParseError(f"{path}: line {lineno}: frequency must be > 0")
        freqs.append(f)
        gains.append(g)
        phases.append(p)
    if len(freqs) < 2:
        raise ParseError(f"{path}: need at least 2 data rows")
    return BodeTrace.from_gain_phase(np.array(freqs), np.array(gains), np.array(phases), label)


def write_bode_csv(path, trace: BodeTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if trace.label:
            fh.write(f"# {trace.label}\n")
        fh.write(BODE_CSV_HEADER + "\n")
        gains = trace.gain_db
        phases = trace.phase_deg
        for f, g, p in zip(trace.freqs, gains, phases):
            fh.write(f"{float(f)!r},{float(g)!r},{float(p)!r}\n")


@dataclass
class RingdownTrace:
    """Averaged cavity ring-down record: uniformly sampled PD voltage."""

    times: np.ndarray
    voltages: np.ndarray
    averages: int = 1

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.voltages = np.asarray(self.voltages, dtype=float)
        if self.times.shape != self.voltages.shape or self.times.ndim != 1:
            raise ValueError("times and voltages must be 1-D and equal length")
        dt = np.diff(self.times)
        if np.any(dt <= 0.0):
            raise ValueError("times must be strictly increasing")
        if len(dt) and (dt.max() - dt.min()) > 1e-6 * dt.mean():
            raise ValueError("sampling must be uniform to within 1 ppm")

    @property
    def dt(self) -> float:
        return float(np.mean(np.diff(self.times)))


def parse_ringdown_csv(path) -> RingdownTrace:
    """Read a ring-down record (time_s,voltage_V; '# averages=<n>')."""
    times: list[float] = []
    volts: list[float] = []
    averages = 1
    for lineno, values, line in _rows(path, RINGDOWN_CSV_HEADER):
        if values is None:
            body = line[1:].strip()
            if body.startswith("averages="):
                averages = int(body.split("=", 1)[1])
            continue
        times.append(values[0])
        volts.append(values[1])
    if len(times) < 2:
        raise ParseError(f"{path}: need at least 2 data rows")
    return RingdownTrace(np.array(times), np.array(volts), averages)


def write_ringdown_csv(path, trace: RingdownTrace) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# averages={trace.averages}\n")
        fh.write(RINGDOWN_CSV_HEADER + "\n")
        for t, v in zip(trace.times, trace.voltages):
            fh.write(f"{float(t)!r},{float(v)!r}\n")


@dataclass
class FitReport:
    """Fit outcome: parameter values with 1-sigma uncertainties, residual
    RMS, and a note describing any excluded region."""

    parameters: dict[str, tuple[float, float]]
    residual_rms: float
    excluded: str = ""
    n_points: int = 0
    iterations: int = 0

    def value(self, name: str) -> float:
        return self.parameters[name][0]

    def sigma(self, name: str) -> float:
        return self.parameters[name][1]

    def to_dict(self) -> dict:
        return {
            "parameters": {
                k: {"value": v, "sigma_1": s} for k, (v, s) in self.parameters.items()
            },
            "residual_rms": self.residual_rms,
            "excluded": self.excluded,
            "n_points": self.n_points,
            "iterations": self.iterations,
        }


def _gauss_newton_exp(t: np.ndarray, v: np.ndarray, p0: np.ndarray, max_iter: int = 200):
    """Least squares for V(t) = V0*exp(-t/tau) + V_off, Gauss-Newton with
    step halving.  Returns (params, iterations)."""
    p = p0.astype(float).copy()

    def residuals(q):
        v0, tau, voff = q
        return v0 * np.exp(-t / tau) + voff - v

    cost = float(np.sum(residuals(p) ** 2))
    it = 0
    for it in range(1, max_iter + 1):
        v0, tau, voff = p
        e = np.exp(-t / tau)
        r = v0 * e + voff - v
        jac = np.column_stack([e, v0 * e * t / tau**2, np.ones_like(t)])
        try:
            step, *_ = np.linalg.lstsq(jac, -r, rcond=None)
        except np.linalg.LinAlgError:
            raise FitError("normal equations are singular") from None
        scale = 1.0
        for _ in range(30):
            trial = p + scale * step
            if trial[1] > 0.0:
                trial_cost = float(np.sum(residuals(trial) ** 2))
                if trial_cost <= cost:
                    break
            scale *= 0.5
        else:
            break
        moved = np.max(np.abs(scale * step) / np.maximum(np.abs(p), 1e-30))
        p = trial
        cost = trial_cost
        if moved < 1e-12:
            break
    return p, it


def fit_ringdown(
    trace: RingdownTrace, exclude_initial: float | None = None
) -> tuple[float, FitReport]:
    """Cavity linewidth from an exponential fit to a ring-down record.

    V(t) = V0*exp(-t/tau) + V_off is fit on the window after
    exclude_initial (default: 3 sample periods, covering switching
    transients); the linewidth is delta_nu_c = 1/(2*pi*tau), with tau the
    intensity 1/e decay time.  Initialization is a linearized log fit,
    refined by Gauss-Newton.  Non-decaying data raises FitError.
    """
    if exclude_initial is None:
        exclude_initial = 3.0 * trace.dt
    t0 = trace.times[0] + exclude_initial
    sel = trace.times >= t0
    t = trace.times[sel] - trace.times[sel][0] if np.any(sel) else np.array([])
    v = trace.voltages[sel]
    if len(t) < 50:
        raise FitError(f"only {len(t)} samples after exclusion; need >= 50")

    voff0 = float(np.mean(v[-max(len(v) // 10, 5):]))
    span = float(v[0] - voff0)
    if span <= 0.0:
        raise FitError("trace does not decay (initial level at or below the tail)")
    # Log-linearize on samples safely above the offset estimate.
    safe = (v - voff0) > 0.05 * span
    ts, ys = t[safe], np.log(v[safe] - voff0)
    slope, intercept = np.polyfit(ts, ys, 1)
    if slope >= 0.0:
        raise FitError("trace does not decay (non-negative log slope)")
    p0 = np.array([math.exp(intercept), -1.0 / slope, voff0])

    p, iterations = _gauss_newton_exp(t, v, p0)
    v0, tau, voff = (float(x) for x in p)
    if tau <= 0.0 or v0 <= 0.0:
        raise FitError("fit collapsed to a non-decaying solution")

    e = np.exp(-t / tau)
    resid = v0 * e + voff - v
    dof = max(len(t) - 3, 1)
    s2 = float(np.sum(resid**2)) / dof
    jac = np.column_stack([e, v0 * e * t / tau**2, np.ones_like(t)])
    cov = s2 * np.linalg.inv(jac.T @ jac)
    sig = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    delta_nu_c = 1.0 / (2.0 * math.pi * tau)
    sigma_dnu = sig[1] / (2.0 * math.pi * tau**2)
    report = FitReport(
        parameters={
            "v0_V": (v0, float(sig[0])),
            "tau_s": (tau, float(sig[1])),
            "v_off_V": (voff, float(sig[2])),
            "delta_nu_c_Hz": (delta_nu_c, float(sigma_dnu)),
        },
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        excluded=f"first {exclude_initial:g} s excluded from the fit",
        n_points=len(t),
        iterations=iterations,
    )
    return delta_nu_c, report


def _require_covered(freqs: np.ndarray, trace: BodeTrace, name: str) -> None:
    if freqs[0] < trace.freqs[0] or freqs[-1] > trace.freqs[-1]:
        raise ValueError(
            f"{name} trace [{trace.freqs[0]:g}, {trace.freqs[-1]:g}] Hz does not cover "
            f"the measured grid [{freqs[0]:g}, {freqs[-1]:g}] Hz"
        )


def fit_lockin_chain(
    measured: BodeTrace, mx1_cal: BodeTrace, fiber_delay: float
) -> Tabulated:
    """Recover the demodulation-chain response D*P from a chain measurement.

    The up-conversion mixer's own response (mx1_cal, measured separately)
    and the optical-fiber propagation delay are divided out; what remains
    is the chain under test, returned as a Tabulated model on the
    measured grid.
    """
    _require_covered(measured.freqs, mx1_cal, "mx1_cal")
    f = measured.freqs
    comp = Tabulated(mx1_cal).response(f) * Delay(fiber_delay).response(f)
    out = measured.response / comp
    return Tabulated(BodeTrace(f, out, label="dp_chain"))


@dataclass
class GfastResult:
    """Compensated laser fast-branch response plus any bins dropped because
    the discriminator response was too small to divide by."""

    model: Tabulated
    flagged_freqs: np.ndarray = field(default_factory=lambda: np.array([]))


def derive_gfast(
    measured: BodeTrace, discriminator_model: TransferModel, tau_l: float
) -> GfastResult:
    """Laser fast-branch response from a discriminator-mediated measurement.

    Divides the measured response by the modeled discriminator chain and
    the loop propagation delay.  Bins where the discriminator response is
    within 1e-9 of zero (relative to its largest on-grid magnitude) are
    flagged and excluded rather than amplified.
    """
    f = measured.freqs
    chain = np.asarray(discriminator_model.response(f), dtype=complex)
    chain = chain * Delay(tau_l).response(f)
    mag = np.abs(chain)
    ok = mag > 1e-9 * float(np.max(mag))
    if np.count_nonzero(ok) < 2:
        raise FitError("discriminator response is ~0 across the measured grid")
    out = measured.response[ok] / chain[ok]
    model = Tabulated(BodeTrace(f[ok], out, label="g_fast"))
    return GfastResult(model=model, flagged_freqs=f[~ok])


def fit_pd_order(
    measured: BodeTrace,
    omega_over_2pi: float,
    orders=range(1, 6),
) -> list[dict]:
    """Fit the lock-in PD phase model for each candidate pole count.

    For each order n the corner f_pd is optimized by golden-section search
    on the phase residual RMS (degrees).  Returns one report per order,
    best first, rather than asserting a single 'true' n -- the residuals
    let the caller judge.
    """
    from .transfer import PdLockin

    f = measured.freqs
    if f[-1] >= omega_over_2pi:
        raise ValueError("measured grid must stay below omega_over_2pi")
    target = measured.phase_deg

    def rms_for(n: int, f_pd: float) -> float:
        model = PdLockin(n, f_pd, omega_over_2pi)
        return float(np.sqrt(np.mean((np.degrees(np.angle(model.response(f))) - target) ** 2)))

    out = []
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    for n in orders:
        a, b = math.log10(omega_over_2pi * 0.2), math.log10(omega_over_2pi * 1e3)
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc, fd = rms_for(n, 10.0**c), rms_for(n, 10.0**d)
        while b - a > 1e-6:
            if fc < fd:
                b, d, fd = d, c, fc
                c = b - invphi * (b - a)
                fc = rms_for(n, 10.0**c)
            else:
                a, c, fc = c, d, fd
                d = a + invphi * (b - a)
                fd = rms_for(n, 10.0**d)
        f_pd = 10.0 ** (0.5 * (a + b))
        out.append({"order": n, "f_pd_Hz": f_pd, "residual_rms_deg": rms_for(n, f_pd)})
    return sorted(out, key=lambda r: r["residual_rms_deg"])
