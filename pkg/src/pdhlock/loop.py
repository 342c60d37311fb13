"""Loop assembly and closed-loop analysis.

Builds the open-loop response alpha from a LoopConfig (fast branch, slow
branch, or their sum), converts between open- and closed-loop responses,
extracts stability margins from Bode traces, evaluates the three-by-three
stimulus/response relations used for closed-loop system discovery, and
propagates noise PSDs through the closed loop.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .noise import PsdTrace
from .pdh import DiscriminatorConfig, effective_ke
from .transfer import (
    BodeTrace,
    CavityPole,
    Delay,
    Gain,
    Integrator,
    LowPassButterworth,
    PdLockin,
    Pid,
    TransferModel,
    compose,
)

__all__ = [
    "SingularityError",
    "FastFilterConfig",
    "LoopConfig",
    "MarginsReport",
    "BranchSum",
    "pd_model",
    "demod_model",
    "discriminator_model",
    "fast_filter_model",
    "slow_filter_model",
    "assemble_open_loop",
    "closed_loop_from_open",
    "closed_to_open",
    "closed_loop_trace",
    "margins",
    "loop_matrix_response",
    "signal_flow_response",
    "closed_loop_psd",
    "closed_loop_psd_sensor",
]

SINGULARITY_EPS = 1e-12

STIMS = ("m2", "m6", "m8")
OBSERVABLES = ("y5", "y6", "y8")


class SingularityError(ArithmeticError):
    """Raised when a closed-loop expression hits 1 + alpha = 0 (or 1 - t = 0)."""


@dataclass(frozen=True)
class FastFilterConfig:
    """Fast-branch PID settings plus the device's parasitic low-pass.

    Real analog loop filters roll off at high frequency; parasitic_f0
    models that as a first-order pole (None for an ideal PID).
    """

    k_p: float
    f_i: float = 0.0
    f_d: float | None = None
    parasitic_f0: float | None = 20e6

    def model(self) -> TransferModel:
        pid = Pid(self.k_p, self.f_i, self.f_d)
        if self.parasitic_f0 is None:
            return pid
        return compose([pid, LowPassButterworth(1, self.parasitic_f0)])


@dataclass(frozen=True)
class BranchSum(TransferModel):
    """Parallel combination: response is the pointwise sum of the branches.

    This is the one non-product composition in the loop (fast + slow
    actuator paths driving the same laser)."""

    branches: tuple[TransferModel, ...]

    def response(self, f):
        out = self.branches[0].response(f)
        for b in self.branches[1:]:
            out = out + b.response(f)
        return out


@dataclass(frozen=True)
class LoopConfig:
    """Full parameterization of the lock.

    g_fast and g_slow are the laser actuator responses in Hz/V (current
    and PZT paths); tau_l is the single aggregated propagation delay.
    demod/pd override the models derived from the discriminator config
    when a measured (Tabulated) response should be used instead.
    """

    discriminator: DiscriminatorConfig
    k_fast: FastFilterConfig
    f_i_slow: float
    g_fast: TransferModel
    g_slow: TransferModel
    tau_l: float
    demod: TransferModel | None = None
    pd: TransferModel | None = None
    label: str = ""

    def __post_init__(self):
        if self.tau_l < 0.0:
            raise ValueError("tau_l must be >= 0")
        if self.f_i_slow < 0.0:
            raise ValueError("f_i_slow must be >= 0")


def pd_model(config: LoopConfig) -> TransferModel:
    """Photodetector response P as seen through the mixer."""
    if config.pd is not None:
        return config.pd
    det = config.discriminator.detector
    return PdLockin(det.order, det.f_pd, config.discriminator.modulation.omega_over_2pi)


def demod_model(config: LoopConfig) -> TransferModel:
    """Demodulation chain D: the post-mixer low-pass when one is fitted."""
    if config.demod is not None:
        return config.demod
    disc = config.discriminator
    if disc.f_m is None:
        return Gain(1.0, label="demod")
    return LowPassButterworth(disc.lp_order, disc.f_m)


def discriminator_model(config: LoopConfig) -> TransferModel:
    """Full frequency discriminator H = D * P * k_e * C (V/Hz)."""
    disc = config.discriminator
    return compose(
        [
            demod_model(config),
            pd_model(config),
            Gain(effective_ke(disc), label="k_e"),
            CavityPole(disc.delta_nu_c),
        ]
    )


def fast_filter_model(config: LoopConfig) -> TransferModel:
    return config.k_fast.model()


def slow_filter_model(config: LoopConfig) -> TransferModel:
    return Integrator(config.f_i_slow)


def analysis_band(config: LoopConfig, f_min: float, f_max: float) -> tuple[float, float]:
    """Clamp a requested grid to where every loop model is valid.

    The lock-in photodetector model only exists below the RF drive
    Omega/2pi, so grids are capped just under it when that model is in
    use (a measured pd override is trusted to carry its own range).
    """
    if config.pd is None:
        cap = 0.98 * config.discriminator.modulation.omega_over_2pi
        f_max = min(f_max, cap)
    if not f_min < f_max:
        raise ValueError("analysis band is empty after clamping to the demodulated band")
    return f_min, f_max


def assemble_open_loop(config: LoopConfig, branch: str = "both") -> TransferModel:
    """Open-loop response: product of all loop components for one branch,
    or the pointwise sum of both branches."""
    h = discriminator_model(config)
    delay = Delay(config.tau_l)
    fast = compose([h, fast_filter_model(config), config.g_fast, delay])
    slow = compose([h, slow_filter_model(config), config.g_slow, delay])
    if branch == "fast":
        return fast
    if branch == "slow":
        return slow
    if branch == "both":
        return BranchSum((fast, slow))
    raise ValueError("branch must be 'fast', 'slow' or 'both'")


def closed_loop_from_open(alpha):
    """alpha/(1 + alpha): the error-signal response y5/m6 of the closed loop."""
    alpha = np.asarray(alpha, dtype=complex)
    denom = 1.0 + alpha
    if np.any(np.abs(denom) < SINGULARITY_EPS):
        raise SingularityError("1 + alpha vanishes: loop is marginally unstable here")
    out = alpha / denom
    return out if out.ndim else complex(out)


def closed_to_open(t):
    """t/(1 - t): recover the open-loop response from a measured y5/m6."""
    t = np.asarray(t, dtype=complex)
    denom = 1.0 - t
    if np.any(np.abs(denom) < SINGULARITY_EPS):
        raise SingularityError("1 - t vanishes: cannot invert the closed-loop relation")
    out = t / denom
    return out if out.ndim else complex(out)


def closed_loop_trace(alpha_trace: BodeTrace) -> BodeTrace:
    return BodeTrace(
        alpha_trace.freqs,
        closed_loop_from_open(alpha_trace.response),
        label=f"{alpha_trace.label}:closed" if alpha_trace.label else "closed",
    )


def closed_to_open_trace(t_trace: BodeTrace) -> BodeTrace:
    return BodeTrace(
        t_trace.freqs,
        closed_to_open(t_trace.response),
        label=f"{t_trace.label}:open" if t_trace.label else "open",
    )


@dataclass
class MarginsReport:
    """Stability margins of an open-loop trace.

    f_ug: unity-gain frequency (|alpha| = 1); phi_m_deg = 180 + angle(alpha)
    there.  f_180: phase crossover; g_m = 1/|alpha(f_180)| (linear ratio).
    f_bump: grid frequency minimizing |1 + alpha|^2, where the servo bump
    peaks.  Missing crossings are None, never an exception.
    """

    f_ug: float | None
    phi_m_deg: float | None
    f_180: float | None
    g_m: float | None
    f_bump: float | None
    stable: bool
    phase_margin_ok: bool
    low_freq_phase_ok: bool
    warnings: list[str] = field(default_factory=list)

    def goal_flags(self) -> dict[str, bool]:
        return {
            "phase_margin_30_to_60": self.phase_margin_ok,
            "phase_above_minus_120_below_ug": self.low_freq_phase_ok,
        }


def _crossings(logf: np.ndarray, y: np.ndarray) -> list[float]:
    """log10(f) positions where y crosses 0, by linear interpolation."""
    out: list[float] = []
    for i in range(len(y) - 1):
        a, b = y[i], y[i + 1]
        if a == 0.0:
            out.append(logf[i])
        elif (a < 0.0 < b) or (a > 0.0 > b):
            out.append(logf[i] + (0.0 - a) * (logf[i + 1] - logf[i]) / (b - a))
    if len(y) and y[-1] == 0.0:
        out.append(logf[-1])
    return out


def margins(alpha_trace: BodeTrace) -> MarginsReport:
    """Extract margins from an open-loop Bode trace.

    Crossings are bracketed on the grid and refined by log-frequency
    linear interpolation; no root polishing is attempted beyond that, so
    the same code is safe on noisy measured traces.  With multiple
    unity-gain crossings the highest-frequency one is reported (the
    conservative choice for servo-bump placement) and a warning is
    recorded.
    """
    notes: list[str] = []
    f = alpha_trace.freqs
    logf = np.log10(f)
    g = alpha_trace.gain_db
    p = alpha_trace.phase_deg

    ug = _crossings(logf, g)
    f_ug = phi_m = None
    if ug:
        if len(ug) > 1:
            notes.append(f"{len(ug)} unity-gain crossings; reporting the highest")
        lf_ug = ug[-1]
        f_ug = 10.0**lf_ug
        i = int(np.searchsorted(logf, lf_ug)) - 1
        i = min(max(i, 0), len(g) - 2)
        if g[i] < g[i + 1]:
            notes.append("|alpha| is increasing through the unity-gain crossing")
        phi_m = 180.0 + float(np.interp(lf_ug, logf, p))

    p180 = _crossings(logf, p + 180.0)
    f_180 = g_m = None
    if p180:
        if len(p180) > 1:
            notes.append(f"{len(p180)} phase crossovers; reporting the lowest")
        lf_180 = p180[0]
        f_180 = 10.0**lf_180
        g_m = 10.0 ** (-float(np.interp(lf_180, logf, g)) / 20.0)

    bump = np.abs(1.0 + alpha_trace.response) ** 2
    f_bump = float(f[int(np.argmin(bump))])

    if f_ug is not None:
        stable = phi_m > 0.0 and (g_m is None or g_m > 1.0)
    elif np.all(g < 0.0):
        stable = True
    else:
        stable = g_m is None or g_m > 1.0
        notes.append("no unity-gain crossing inside the trace span")

    phase_margin_ok = phi_m is not None and 30.0 < phi_m < 60.0
    below = f < (f_ug if f_ug is not None else f[-1])
    low_freq_phase_ok = bool(np.all(p[below] > -120.0)) if np.any(below) else True

    for note in notes:
        warnings.warn(note, stacklevel=2)
    return MarginsReport(
        f_ug=f_ug,
        phi_m_deg=phi_m,
        f_180=f_180,
        g_m=g_m,
        f_bump=f_bump,
        stable=stable,
        phase_margin_ok=phase_margin_ok,
        low_freq_phase_ok=low_freq_phase_ok,
        warnings=notes,
    )


def _branch_parts(config: LoopConfig, f):
    h = discriminator_model(config).response(f)
    kf = fast_filter_model(config).response(f)
    gf = config.g_fast.response(f)
    ks = slow_filter_model(config).response(f)
    gs = config.g_slow.response(f)
    t = Delay(config.tau_l).response(f)
    return h, kf, gf, ks, gs, t


def loop_matrix_response(config: LoopConfig, stim: str, obs: str, f):
    """One entry of the closed-loop stimulus/response matrix.

    Stimulus is injected at a summing point (m2: optical path at the EOM,
    m6: loop-filter input, m8: fast filter output) and observed at an
    electrical signal (y5 error signal, y6 filter input, y8 fast filter
    output).  All entries share the 1/(1 + alpha) prefactor:

        y5:  ( H,            alpha,   alpha_f/K_f )
        y6:  (-H,            1,      -alpha_f/K_f )
        y8:  (-alpha_f/G_f,  K_f,     1 + alpha_s )
    """
    if stim not in STIMS:
        raise ValueError(f"stim must be one of {STIMS}")
    if obs not in OBSERVABLES:
        raise ValueError(f"obs must be one of {OBSERVABLES}")
    h, kf, gf, ks, gs, t = _branch_parts(config, f)
    alpha_f = h * kf * gf * t
    alpha_s = h * ks * gs * t
    alpha = alpha_f + alpha_s
    denom = 1.0 + alpha
    if np.any(np.abs(denom) < SINGULARITY_EPS):
        raise SingularityError("1 + alpha vanishes at a requested frequency")
    entries = {
        ("y5", "m2"): h,
        ("y5", "m6"): alpha,
        ("y5", "m8"): alpha_f / kf,
        ("y6", "m2"): -h,
        ("y6", "m6"): np.ones_like(alpha),
        ("y6", "m8"): -alpha_f / kf,
        ("y8", "m2"): -alpha_f / gf,
        ("y8", "m6"): kf,
        ("y8", "m8"): 1.0 + alpha_s,
    }
    out = entries[(obs, stim)] / denom
    out = np.asarray(out)
    return out if out.ndim else complex(out)


def signal_flow_response(config: LoopConfig, stim: str, obs: str, f):
    """Independent check: solve the loop's signal-flow equations directly.

    Topology: y6 = m6 - y5; y8 = K_f*y6 + m8; the fast actuator drive
    travels through the loop delay T and G_fast; the slow branch through
    T and G_slow; m2 adds to the optical frequency entering the sensor:
    y5 = H*(G_f*T*y8 + G_s*T*K_s*y6 + m2).  Solving the three equations
    gives every entry without writing the matrix down.
    """
    if stim not in STIMS:
        raise ValueError(f"stim must be one of {STIMS}")
    if obs not in OBSERVABLES:
        raise ValueError(f"obs must be one of {OBSERVABLES}")
    h, kf, gf, ks, gs, t = _branch_parts(config, f)
    ones = np.ones_like(h)
    zeros = np.zeros_like(h)
    m2 = ones if stim == "m2" else zeros
    m6 = ones if stim == "m6" else zeros
    m8 = ones if stim == "m8" else zeros
    alpha = h * t * (kf * gf + ks * gs)
    denom = 1.0 + alpha
    if np.any(np.abs(denom) < SINGULARITY_EPS):
        raise SingularityError("1 + alpha vanishes at a requested frequency")
    # y5 = H*(G_f*T*(K_f*(m6 - y5) + m8) + G_s*T*K_s*(m6 - y5) + m2)
    y5 = (alpha * m6 + h * gf * t * m8 + h * m2) / denom
    if obs == "y5":
        out = y5
    elif obs == "y6":
        out = m6 - y5
    else:
        out = kf * (m6 - y5) + m8
    out = np.asarray(out)
    return out if out.ndim else complex(out)


def _psd_values(psd, freqs: np.ndarray) -> np.ndarray:
    """Accept a PsdTrace (same grid), a callable f -> S, or an array."""
    if isinstance(psd, PsdTrace):
        if len(psd) != len(freqs) or not np.allclose(psd.freqs, freqs, rtol=1e-9, atol=0.0):
            raise ValueError("PSD trace grid does not match the alpha trace grid")
        return psd.values
    if callable(psd):
        return np.asarray(psd(freqs), dtype=float)
    arr = np.asarray(psd, dtype=float)
    if arr.ndim == 0:
        return np.full_like(freqs, float(arr))
    if arr.shape != freqs.shape:
        raise ValueError("PSD array length does not match the alpha trace grid")
    return arr


def closed_loop_psd(
    alpha_trace: BodeTrace,
    s_n1,
    s_n4,
    k_e: float,
    cavity: TransferModel,
) -> PsdTrace:
    """Locked-laser frequency-noise PSD.

    S_y1 = S_n1/|1+alpha|^2 + (|alpha|^2/|1+alpha|^2) * S_n4/(k_e^2 |C|^2):
    laser noise is suppressed by the loop gain while discriminator noise
    (n4, in V^2/Hz at the photodetector) is imprinted through the
    discriminator slope and cavity pole.
    """
    f = alpha_trace.freqs
    alpha = alpha_trace.response
    denom = np.abs(1.0 + alpha) ** 2
    if np.any(denom < SINGULARITY_EPS**2):
        raise SingularityError("1 + alpha vanishes on the trace grid")
    n1 = _psd_values(s_n1, f)
    n4 = _psd_values(s_n4, f)
    c = cavity.response(f)
    values = n1 / denom + (np.abs(alpha) ** 2 / denom) * n4 / (k_e**2 * np.abs(c) ** 2)
    return PsdTrace(f, values, label="s_y1")


def closed_loop_psd_sensor(
    alpha_trace: BodeTrace,
    s_n1,
    s_n5,
    sensor: TransferModel,
) -> PsdTrace:
    """Generic-sensor form: S_y1 = S_n1/|1+a|^2 + (|a|^2/|1+a|^2) S_n5/|H|^2."""
    f = alpha_trace.freqs
    alpha = alpha_trace.response
    denom = np.abs(1.0 + alpha) ** 2
    if np.any(denom < SINGULARITY_EPS**2):
        raise SingularityError("1 + alpha vanishes on the trace grid")
    n1 = _psd_values(s_n1, f)
    n5 = _psd_values(s_n5, f)
    h = sensor.response(f)
    values = n1 / denom + (np.abs(alpha) ** 2 / denom) * n5 / np.abs(h) ** 2
    return PsdTrace(f, values, label="s_y1")
