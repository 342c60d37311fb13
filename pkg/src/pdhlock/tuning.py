"""Executable loop-tuning workflow.

Drives the prepare/measure/optimize/check sequence against a loop model:
push each loop-filter parameter until the modeled loop loses its
stability margin, back off, and iterate until the settings stop moving.
Also holds the design-goal checks (low-frequency excess, phase budget)
and the cavity-linewidth advisor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .loop import LoopConfig, MarginsReport, assemble_open_loop, margins
from .transfer import BodeTrace, TransferModel, bode_grid, log_grid

__all__ = [
    "OscillationVerdict",
    "TunePolicy",
    "TuneStep",
    "TuneResult",
    "PhaseBudget",
    "CavityAdvice",
    "LowFreqCheckResult",
    "oscillation_test",
    "autotune_fast",
    "low_freq_excess_check",
    "phase_budget",
    "component_phase_deg",
    "cavity_advisor",
]

SQRT10 = math.sqrt(10.0)


@dataclass(frozen=True)
class OscillationVerdict:
    """Outcome of closing the modeled loop: stable, or oscillating at f."""

    oscillating: bool
    frequency: float | None = None
    margins: MarginsReport | None = None


@dataclass(frozen=True)
class TunePolicy:
    """Knobs of the tuning schedule.

    Parameters are pushed in multiplicative steps of step_ratio until the
    loop oscillates; 'reduce by 50%' divides the offending value by 2 and
    'raise by 50%' multiplies it by 1.5.  A sweep over (K_P, f_I, f_D)
    repeats until no parameter moves by more than converge_rtol.  The
    final gain raise is applied in raise_fraction increments for as long
    as the phase margin stays at or above phi_m_floor.
    """

    step_ratio: float = 1.25
    reduce_factor: float = 2.0
    raise_factor: float = 1.5
    raise_fraction: float = 0.10
    converge_rtol: float = 0.05
    phi_m_floor: float = 30.0
    phi_m_ceiling: float = 60.0
    k_p_start: float = 1e-3
    f_i_start: float = 10.0
    f_d_start_factor: float = 10.0  # f_D enabled at this multiple of the current f_UG
    f_i_slow_start: float = 1.0
    f_i_slow_cap: float = 1e6
    tune_slow: bool = True
    f_min: float = 10.0
    f_max: float = 10e6
    points_per_decade: int = 60
    max_steps_per_push: int = 200
    max_sweeps: int = 25
    max_raises: int = 200


@dataclass(frozen=True)
class TuneStep:
    """One recorded action of the schedule (the trace is replayable)."""

    action: str
    parameter: str
    value: float
    verdict: str
    f_ug: float | None


@dataclass
class TuneResult:
    k_p: float
    f_i: float
    f_d: float | None
    f_i_slow: float
    margins: MarginsReport
    iterations: int
    trace: list[TuneStep] = field(default_factory=list)
    infeasible: bool = False
    binding_constraint: str = ""


def _margins_quiet(config: LoopConfig, policy: TunePolicy) -> MarginsReport:
    model = assemble_open_loop(config, "both")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        trace = bode_grid(model, policy.f_min, policy.f_max, policy.points_per_decade)
        return margins(trace)


def oscillation_test(config: LoopConfig, policy: TunePolicy | None = None) -> OscillationVerdict:
    """Close the modeled loop and ask whether it would oscillate.

    Oscillation means the assembled open loop has phi_m <= 0 at its
    unity-gain crossing or gain margin <= 1 at its phase crossover; the
    offending frequency is reported.
    """
    policy = policy or TunePolicy()
    rep = _margins_quiet(config, policy)
    if rep.phi_m_deg is not None and rep.phi_m_deg <= 0.0:
        return OscillationVerdict(True, rep.f_ug, rep)
    if rep.g_m is not None and rep.g_m <= 1.0:
        return OscillationVerdict(True, rep.f_180, rep)
    return OscillationVerdict(False, None, rep)


def _with_fast(config: LoopConfig, **kw) -> LoopConfig:
    return replace(config, k_fast=replace(config.k_fast, **kw))


def _f_d_floor(config: LoopConfig, policy: TunePolicy) -> float:
    """Lowest sensible derivative corner: a decade below the current
    crossover.  The derivative lead saturates there; pushing f_D further
    down only pumps high-frequency gain into the delay-limited region."""
    rep = _margins_quiet(config, policy)
    if rep.f_ug is None:
        return policy.f_min
    return max(policy.f_min, rep.f_ug / 10.0)


class _Session:
    """Bookkeeping for one autotune run."""

    def __init__(self, config: LoopConfig, policy: TunePolicy):
        self.policy = policy
        self.config = config
        self.trace: list[TuneStep] = []
        self.evals = 0

    def probe(self, config: LoopConfig, action: str, parameter: str, value: float) -> OscillationVerdict:
        self.evals += 1
        v = oscillation_test(config, self.policy)
        verdict = f"oscillating@{v.frequency:.6g}" if v.oscillating else "stable"
        self.trace.append(
            TuneStep(action, parameter, value, verdict, v.margins.f_ug if v.margins else None)
        )
        return v


def _push_until_oscillation(
    session: _Session,
    config: LoopConfig,
    parameter: str,
    up: bool,
    floor: float | None = None,
    ceiling: float | None = None,
) -> tuple[LoopConfig, bool]:
    """Multiplicative steps until the loop oscillates, then back off.

    Returns (config at the backed-off value, True if oscillation was seen).
    Raising parameters back off by dividing the offending value by
    reduce_factor; falling parameters (f_D) back off by multiplying by
    raise_factor.
    """
    pol = session.policy
    value = getattr(config.k_fast, parameter)
    direction = "raise" if up else "reduce"
    for _ in range(pol.max_steps_per_push):
        trial = value * pol.step_ratio if up else value / pol.step_ratio
        if ceiling is not None and trial > ceiling:
            return config, False
        if floor is not None and trial < floor:
            return config, False
        candidate = _with_fast(config, **{parameter: trial})
        verdict = session.probe(candidate, direction, parameter, trial)
        if verdict.oscillating:
            backed = trial / pol.reduce_factor if up else trial * pol.raise_factor
            config = _with_fast(config, **{parameter: backed})
            session.probe(config, "back-off", parameter, backed)
            return config, True
        config = candidate
        value = trial
    return config, False


def autotune_fast(config: LoopConfig, policy: TunePolicy | None = None) -> TuneResult:
    """Run the tuning schedule against the loop model.

    Stages: establish a weak lock (proportional gain up from
    k_p_start with minimal integrator and no derivative), raise the
    integrator, enable and lower the derivative corner, then sweep all
    three until converged; finally nudge the gain up while the phase
    margin holds, and tune the slow-branch integrator last.  The result is
    deterministic: the same config and policy always produce the same
    trace.  If the 30-60 degree phase-margin window cannot be reached the
    result is marked infeasible with the constraint that bound it.
    """
    pol = policy or TunePolicy()
    session = _Session(config, pol)

    cfg = replace(
        config,
        k_fast=replace(
            config.k_fast, k_p=pol.k_p_start, f_i=pol.f_i_start, f_d=None
        ),
        f_i_slow=0.0,
    )
    verdict = session.probe(cfg, "init", "k_p", pol.k_p_start)
    if verdict.oscillating:
        # No weak lock at the starting gain: search downward.
        ok = False
        value = pol.k_p_start
        for _ in range(pol.max_steps_per_push):
            value /= pol.step_ratio
            cfg = _with_fast(cfg, k_p=value)
            if not session.probe(cfg, "reduce", "k_p", value).oscillating:
                ok = True
                break
        if not ok:
            rep = _margins_quiet(cfg, pol)
            return TuneResult(
                cfg.k_fast.k_p, cfg.k_fast.f_i, cfg.k_fast.f_d, 0.0, rep,
                session.evals, session.trace, True,
                "no stable proportional gain found (loop oscillates at every probed K_P)",
            )

    cfg, _ = _push_until_oscillation(session, cfg, "k_p", up=True)
    cfg, _ = _push_until_oscillation(session, cfg, "f_i", up=True, ceiling=pol.f_max)

    rep = _margins_quiet(cfg, pol)
    f_ug_now = rep.f_ug if rep.f_ug is not None else math.sqrt(pol.f_min * pol.f_max)
    f_d0 = min(pol.f_d_start_factor * f_ug_now, pol.f_max)
    cfg = _with_fast(cfg, f_d=f_d0)
    session.probe(cfg, "enable", "f_d", f_d0)
    cfg, _ = _push_until_oscillation(session, cfg, "f_d", up=False,
                                     floor=_f_d_floor(cfg, pol))

    # Sweep the three parameters until the crossover stops improving;
    # keep (and finally revert to) the best stable state seen at a sweep
    # boundary so the push/back-off cycle cannot limit-cycle.
    def sweep_metric(c: LoopConfig) -> float:
        r = _margins_quiet(c, pol)
        if not r.stable or r.f_ug is None:
            return -math.inf
        return r.f_ug

    best_cfg, best_metric = cfg, sweep_metric(cfg)
    for _ in range(pol.max_sweeps):
        before = (cfg.k_fast.k_p, cfg.k_fast.f_i, cfg.k_fast.f_d)
        cfg, _ = _push_until_oscillation(session, cfg, "k_p", up=True)
        cfg, _ = _push_until_oscillation(session, cfg, "f_i", up=True, ceiling=pol.f_max)
        cfg, _ = _push_until_oscillation(session, cfg, "f_d", up=False,
                                         floor=_f_d_floor(cfg, pol))
        metric = sweep_metric(cfg)
        if metric > best_metric:
            best_cfg, best_metric = cfg, metric
        after = (cfg.k_fast.k_p, cfg.k_fast.f_i, cfg.k_fast.f_d)
        moved = max(
            abs(a - b) / max(abs(b), 1e-300) for a, b in zip(after, before)
        )
        if moved <= pol.converge_rtol or metric < best_metric * (1.0 + pol.converge_rtol):
            break
    if best_metric > -math.inf:
        cfg = best_cfg
        session.probe(cfg, "revert-to-best", "k_p", cfg.k_fast.k_p)

    # Check stage: bring the phase margin into the target window and then
    # maximize the crossover against the margin floor, shrinking the gain
    # step whenever a full step would jump straight through the window.
    def check_stage(c: LoopConfig) -> LoopConfig:
        fraction = pol.raise_fraction
        for _ in range(pol.max_raises):
            rep = _margins_quiet(c, pol)
            phi = rep.phi_m_deg
            if phi is None:
                break
            if phi < pol.phi_m_floor or not rep.stable:
                trial = _with_fast(c, k_p=c.k_fast.k_p / (1.0 + fraction))
                v = session.probe(trial, "reduce", "k_p", trial.k_fast.k_p)
                trial_phi = v.margins.phi_m_deg if v.margins else None
                if trial_phi is not None and trial_phi > phi:
                    c = trial
                    continue
            else:
                trial = _with_fast(c, k_p=c.k_fast.k_p * (1.0 + fraction))
                v = session.probe(trial, "raise", "k_p", trial.k_fast.k_p)
                trial_phi = v.margins.phi_m_deg if v.margins else None
                if (not v.oscillating) and trial_phi is not None and trial_phi >= pol.phi_m_floor:
                    c = trial
                    continue
            if fraction > 0.005:
                fraction /= 2.0
                continue
            break
        return c

    def endpoint_rank(c: LoopConfig) -> tuple:
        r = _margins_quiet(c, pol)
        in_window = (
            r.phi_m_deg is not None
            and r.stable
            and pol.phi_m_floor < r.phi_m_deg < pol.phi_m_ceiling
        )
        return (in_window, r.f_ug if (r.stable and r.f_ug is not None) else -math.inf)

    # A derivative corner that only props up a fragile unity-gain plateau
    # blocks the gain raise entirely; compare the tuned endpoint against
    # one with the derivative disabled and keep the better of the two.
    cfg = check_stage(cfg)
    if cfg.k_fast.f_d is not None:
        alt = check_stage(_with_fast(cfg, f_d=None))
        if endpoint_rank(alt) > endpoint_rank(cfg):
            cfg = alt
            session.probe(cfg, "disable", "f_d", 0.0)

    rep = _margins_quiet(cfg, pol)
    infeasible = False
    binding = ""
    if rep.phi_m_deg is None:
        infeasible = True
        binding = "no unity-gain crossing in the analysis band after tuning"
    elif not (pol.phi_m_floor < rep.phi_m_deg < pol.phi_m_ceiling):
        infeasible = True
        binding = (
            f"phase margin {rep.phi_m_deg:.1f} deg cannot be brought inside "
            f"({pol.phi_m_floor:g}, {pol.phi_m_ceiling:g}) deg"
        )

    f_i_slow = 0.0
    if pol.tune_slow and not infeasible:
        value = pol.f_i_slow_start
        slow_cfg = replace(cfg, f_i_slow=value)
        v = session.probe(slow_cfg, "enable", "f_i_slow", value)
        if not v.oscillating:
            seen = False
            for _ in range(pol.max_steps_per_push):
                trial_v = value * pol.step_ratio
                if trial_v > pol.f_i_slow_cap:
                    break
                trial = replace(cfg, f_i_slow=trial_v)
                if session.probe(trial, "raise", "f_i_slow", trial_v).oscillating:
                    value = trial_v / pol.reduce_factor
                    seen = True
                    break
                value = trial_v
            if not seen:
                session.trace.append(
                    TuneStep("cap", "f_i_slow", value, "slow branch never oscillated", None)
                )
            cfg = replace(cfg, f_i_slow=value)
            session.probe(cfg, "back-off" if seen else "keep", "f_i_slow", value)
            f_i_slow = value
            rep = _margins_quiet(cfg, pol)

    return TuneResult(
        k_p=cfg.k_fast.k_p,
        f_i=cfg.k_fast.f_i,
        f_d=cfg.k_fast.f_d,
        f_i_slow=f_i_slow,
        margins=rep,
        iterations=session.evals,
        trace=session.trace,
        infeasible=infeasible,
        binding_constraint=binding,
    )


@dataclass(frozen=True)
class LowFreqCheckResult:
    """Outcome of the low-frequency flatness check on y5/m6."""

    passed: bool
    band: tuple[float, float]
    offending: list[tuple[float, float]]


def low_freq_excess_check(closed_trace: BodeTrace, f_180cl: float) -> LowFreqCheckResult:
    """Check for excess low-frequency noise in the closed-loop response.

    A healthy lock has y5/m6 ~ 1 well below the closed-loop phase
    crossover: gain within +-3 dB of 0 dB and phase within +-30 degrees
    over the decade [f_180cl/100, f_180cl/10].  Failures report the
    offending sub-band(s), e.g. a gap between slow- and fast-branch
    coverage.
    """
    if f_180cl <= 0.0:
        raise ValueError("f_180cl must be > 0")
    lo, hi = f_180cl / 100.0, f_180cl / 10.0
    f = closed_trace.freqs
    if f[0] > lo or f[-1] < hi:
        raise ValueError(
            f"trace [{f[0]:g}, {f[-1]:g}] Hz does not cover the check band [{lo:g}, {hi:g}] Hz"
        )
    sel = (f >= lo) & (f <= hi)
    fs = f[sel]
    ok = (np.abs(closed_trace.gain_db[sel]) <= 3.0) & (
        np.abs(closed_trace.phase_deg[sel]) <= 30.0
    )
    offending: list[tuple[float, float]] = []
    i = 0
    while i < len(ok):
        if not ok[i]:
            j = i
            while j + 1 < len(ok) and not ok[j + 1]:
                j += 1
            offending.append((float(fs[i]), float(fs[j])))
            i = j + 1
        else:
            i += 1
    return LowFreqCheckResult(passed=not offending, band=(lo, hi), offending=offending)


def component_phase_deg(model: TransferModel, f_ref: float, points_per_decade: int = 100) -> float:
    """Unwrapped phase of a component at f_ref, in degrees.

    Unwrapping runs from four decades below f_ref so that components with
    more than 180 degrees of accumulated lag (long delays) budget
    correctly.  Measured (Tabulated) responses use their own stored
    unwrapped phase, interpolated at f_ref.
    """
    if f_ref <= 0.0:
        raise ValueError("f_ref must be > 0")
    from .transfer import Tabulated

    if isinstance(model, Tabulated):
        tr = model.trace
        if not tr.freqs[0] <= f_ref <= tr.freqs[-1]:
            raise ValueError(f"f_ref outside the tabulated range of {tr.label or 'trace'}")
        return float(np.interp(np.log10(f_ref), np.log10(tr.freqs), tr.phase_deg))
    grid = log_grid(f_ref / 1e4, f_ref, points_per_decade)
    phase = np.degrees(np.unwrap(np.angle(model.response(grid))))
    return float(phase[-1])


@dataclass
class PhaseBudget:
    """Per-component phase accounting at a reference frequency."""

    f_ref: float
    entries: list[tuple[str, float]]
    sum_deg: float
    measured_deg: float
    residual_deg: float

    def to_dict(self) -> dict:
        return {
            "f_ref_Hz": self.f_ref,
            "entries": [{"component": n, "phase_deg": p} for n, p in self.entries],
            "sum_deg": self.sum_deg,
            "measured_deg": self.measured_deg,
            "residual_deg": self.residual_deg,
        }


def phase_budget(
    components: list[tuple[str, TransferModel]],
    f_ref: float,
    measured_alpha_phase_deg: float,
) -> PhaseBudget:
    """Audit the open-loop phase: per-component shifts at f_ref, their sum,
    and the residual against the measured open-loop phase.

    A residual beyond a few degrees means a component is mismodeled or a
    lag source is missing from the list.
    """
    entries = [(name, component_phase_deg(model, f_ref)) for name, model in components]
    total = float(sum(p for _, p in entries))
    return PhaseBudget(
        f_ref=f_ref,
        entries=entries,
        sum_deg=total,
        measured_deg=measured_alpha_phase_deg,
        residual_deg=measured_alpha_phase_deg - total,
    )


@dataclass(frozen=True)
class CavityAdvice:
    """Recommended cavity linewidth range and the reasoning."""

    delta_nu_c_min: float
    delta_nu_c_max: float
    empty: bool
    rationale: str

    @property
    def interval(self) -> tuple[float, float]:
        return (self.delta_nu_c_min, self.delta_nu_c_max)


def cavity_advisor(f_ug_fast: float, f_ug_slow: float) -> CavityAdvice:
    """Noise-favorable cavity linewidth window for given loop bandwidths.

    Keeping the cavity pole delta_nu_c/2 a decade-ish below the fast
    unity-gain point (factor sqrt(10)) suppresses discriminator noise
    without piling phase lag onto the crossover, while keeping it a
    factor sqrt(10) above the slow unity-gain point preserves the slow
    branch's authority: sqrt(10)*f_ug_slow < delta_nu_c/2 < f_ug_fast/sqrt(10).
    """
    if f_ug_fast <= 0.0 or f_ug_slow <= 0.0:
        raise ValueError("unity-gain frequencies must be > 0")
    if f_ug_slow >= f_ug_fast:
        raise ValueError("f_ug_slow must be below f_ug_fast")
    lo = 2.0 * SQRT10 * f_ug_slow
    hi = 2.0 * f_ug_fast / SQRT10
    empty = lo >= hi
    rationale = (
        "cavity pole delta_nu_c/2 below f_ug_fast/sqrt(10) keeps discriminator "
        "noise suppressed and the crossover phase shallow; above "
        "sqrt(10)*f_ug_slow it leaves the slow branch effective"
    )
    if empty:
        warnings.warn(
            "no cavity linewidth satisfies both bounds; increase the separation "
            "between fast and slow unity-gain frequencies",
            stacklevel=2,
        )
    return CavityAdvice(lo, hi, empty, rationale)
