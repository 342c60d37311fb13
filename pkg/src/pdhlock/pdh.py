"""PDH discriminator physics.

Error-signal shape and slope, modulation-depth optimization, demodulation
filter sizing, and the photodetection noise budget.  Everything here is a
pure function of explicit configuration dataclasses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ELEMENTARY_CHARGE_C",
    "ModulationConfig",
    "DetectorConfig",
    "DiscriminatorConfig",
    "SidebandRatio",
    "NoiseBudget",
    "bessel_j",
    "optimal_beta",
    "sideband_ratio",
    "error_signal",
    "ke_slope",
    "effective_ke",
    "pd_noise_budget",
    "required_attenuation_db",
    "demod_filter_corner",
    "demod_filter_requirement",
]

ELEMENTARY_CHARGE_C = 1.602176634e-19


def bessel_j(order: int, x) -> np.ndarray | float:
    """Bessel function of the first kind, ascending power series.

    J_k(x) = sum_m (-1)^m / (m! (m+k)!) (x/2)^(2m+k).  Terms are summed
    until they fall below 1e-17 of the running magnitude (at most 60
    terms).  For |x| <= 5 the m-th term is bounded by (5/2)^(2m+k)/(m!(m+k)!),
    which is < 1e-16 by m = 25, so truncation error is far below the 1e-10
    agreement demanded of the series in this band.
    """
    if order < 0:
        raise ValueError("order must be >= 0")
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 30.0):
        raise ValueError("series evaluation is limited to |x| <= 30")
    half = x / 2.0
    term = half**order / math.factorial(order)
    total = np.array(term, dtype=float, copy=True)
    scale = np.maximum(np.max(np.abs(total)), 1.0)
    for m in range(1, 60):
        term = term * (-(half * half)) / (m * (m + order))
        total += term
        if np.max(np.abs(term)) < 1e-17 * scale:
            break
    return total if total.ndim else float(total)


def optimal_beta() -> float:
    """Modulation depth maximizing the discriminator slope.

    The slope is proportional to J0(beta)*J1(beta); golden-section search
    on (0.5, 2.0) localizes its maximum, beta ~= 1.082.
    """

    def merit(b: float) -> float:
        return float(bessel_j(0, b) * bessel_j(1, b))

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = 0.5, 2.0
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = merit(c), merit(d)
    while b - a > 1e-12:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = merit(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = merit(d)
    return 0.5 * (a + b)


@dataclass(frozen=True)
class SidebandRatio:
    """Relative sizes of the demodulated signal (q) and the unwanted
    modulation at Omega (p) for a given modulation depth."""

    q: float
    p: float

    def attenuation_needed_db(self, snr_target: float) -> float:
        """Filter attenuation (negative dB) required at Omega to reach snr_target."""
        if snr_target <= 0.0:
            raise ValueError("snr_target must be > 0")
        return -20.0 * math.log10(snr_target / (self.q / self.p))


def sideband_ratio(beta: float) -> SidebandRatio:
    """q = 4*J0*J1 (signal) and p = 2*J1^2 + 4*J0*J2 (spurious at Omega)."""
    if beta <= 0.0:
        raise ValueError("beta must be > 0")
    j0, j1, j2 = (float(bessel_j(k, beta)) for k in (0, 1, 2))
    return SidebandRatio(q=4.0 * j0 * j1, p=2.0 * j1 * j1 + 4.0 * j0 * j2)


@dataclass(frozen=True)
class ModulationConfig:
    """EOM drive: modulation depth beta (rad) at RF frequency Omega/2pi (Hz)."""

    beta: float
    omega_over_2pi: float

    def __post_init__(self):
        if self.beta <= 0.0:
            raise ValueError("beta must be > 0")
        if self.omega_over_2pi <= 0.0:
            raise ValueError("omega_over_2pi must be > 0")


@dataclass(frozen=True)
class DetectorConfig:
    """Photodetector + transimpedance amplifier.

    responsivity in A/W, transimpedance in V/A, NEP in W/sqrt(Hz); the
    frequency response is an order-n low-pass with corner f_pd.
    """

    responsivity: float
    transimpedance: float
    nep: float
    f_pd: float
    order: int = 3

    def __post_init__(self):
        for name in ("responsivity", "transimpedance", "nep", "f_pd"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be > 0")
        if self.order < 1:
            raise ValueError("order must be >= 1")


@dataclass(frozen=True)
class DiscriminatorConfig:
    """Everything that shapes the error signal.

    f_m is the corner of the low-pass after the mixer (None when the loop
    filter's own roll-off is used instead); k_e_override, when set, is an
    empirically measured slope (V/Hz) that takes precedence over the
    computed one; offset_v models a DC offset error on the error signal.
    """

    modulation: ModulationConfig
    detector: DetectorConfig
    delta_nu_c: float
    p_pd: float
    f_m: float | None = None
    lp_order: int = 8
    k_e_override: float | None = None
    offset_v: float = 0.0

    def __post_init__(self):
        if self.delta_nu_c <= 0.0:
            raise ValueError("delta_nu_c must be > 0")
        if self.p_pd < 0.0:
            raise ValueError("p_pd must be >= 0")
        if self.f_m is not None and self.f_m <= 0.0:
            raise ValueError("f_m must be > 0 (or None)")
        if self.lp_order < 1:
            raise ValueError("lp_order must be >= 1")


def ke_slope(config: DiscriminatorConfig) -> float:
    """Discriminator slope k_e = 8*J0(beta)*J1(beta)*P_PD*R*g_tr/delta_nu_c (V/Hz)."""
    b = config.modulation.beta
    det = config.detector
    return float(
        8.0
        * bessel_j(0, b)
        * bessel_j(1, b)
        * config.p_pd
        * det.responsivity
        * det.transimpedance
        / config.delta_nu_c
    )


def effective_ke(config: DiscriminatorConfig) -> float:
    """Measured k_e when available, otherwise the computed slope."""
    if config.k_e_override is not None:
        return config.k_e_override
    return ke_slope(config)


def _reflection(detuning, delta_nu_c: float) -> np.ndarray:
    """Single-pole reflection coefficient of a matched high-finesse cavity.

    F(d) = (j*2d/dnu)/(1 + j*2d/dnu): zero on resonance, unity far away.
    """
    x = 2.0 * np.asarray(detuning, dtype=float) / delta_nu_c
    return 1j * x / (1.0 + 1j * x)


def error_signal(config: DiscriminatorConfig, detuning) -> np.ndarray | float:
    """PDH error signal (V) vs laser-cavity detuning (Hz).

    Carrier and first-order sidebands only: the beat of the J0 carrier
    with the J+-1 sidebands reflected by the cavity,

        y5 = 2*J0*J1*P_PD*R*g_tr * Im[F(d)*conj(F(d+fo)) - conj(F(d))*F(d-fo)]

    with fo = Omega/2pi.  Antisymmetric in detuning; the central zero
    crossing has slope k_e and the response is linear only within about
    +-delta_nu_c/2 of it.  config.offset_v is added to model an offset
    error (a shifted lock point).
    """
    d = np.asarray(detuning, dtype=float)
    fo = config.modulation.omega_over_2pi
    dnu = config.delta_nu_c
    b = config.modulation.beta
    det = config.detector
    amp = (
        2.0
        * float(bessel_j(0, b) * bessel_j(1, b))
        * config.p_pd
        * det.responsivity
        * det.transimpedance
    )
    f0 = _reflection(d, dnu)
    fp = _reflection(d + fo, dnu)
    fm = _reflection(d - fo, dnu)
    out = amp * np.imag(f0 * np.conj(fp) - np.conj(f0) * fm) + config.offset_v
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class NoiseBudget:
    """Electronic vs photon shot noise budget of the detection chain.

    p_eq_w is the optical power where electronic noise equals shot noise;
    snr_at_p_eq is the figure of merit at that crossover power;
    snr_at_p_pd is the budget at the actual operating power.
    """

    p_eq_w: float
    snr_at_p_eq: float
    snr_at_p_pd: float
    shot_limited: bool


def pd_noise_budget(
    detector: DetectorConfig, beta: float, p_pd: float, f_m: float
) -> NoiseBudget:
    """Noise budget in the demodulation band (Omega/2pi - f_m, Omega/2pi + f_m).

    The band contributing to error-signal noise has width delta = 2*f_m.
    Electronic noise current is NEP*R*sqrt(delta); shot-noise current at
    power P is sqrt(4*e*R*J1(beta)^2*P*delta).  They cross at
    P_eq = NEP^2*R/(4*e*J1^2), above which the detection is shot limited.
    """
    if p_pd < 0.0:
        raise ValueError("p_pd must be >= 0")
    if f_m <= 0.0:
        raise ValueError("f_m must be > 0")
    e = ELEMENTARY_CHARGE_C
    r = detector.responsivity
    j1sq = float(bessel_j(1, beta)) ** 2
    delta = 2.0 * f_m
    sqrt_delta = math.sqrt(delta)
    p_eq = detector.nep**2 * r / (4.0 * e * j1sq)
    snr_at_p_eq = detector.nep * r / (8.0 * e * j1sq * sqrt_delta)

    def snr_at(p: float) -> float:
        if p == 0.0:
            return 0.0
        i_en = detector.nep * r * sqrt_delta
        i_sn = math.sqrt(4.0 * e * r * j1sq * p) * sqrt_delta
        return p * r / (i_en + i_sn)

    return NoiseBudget(
        p_eq_w=p_eq,
        snr_at_p_eq=snr_at_p_eq,
        snr_at_p_pd=snr_at(p_pd),
        shot_limited=p_pd > p_eq,
    )


def required_attenuation_db(beta: float, snr_target: float) -> float:
    """Attenuation (negative dB) needed at Omega for a given SNR target."""
    return sideband_ratio(beta).attenuation_needed_db(snr_target)


def demod_filter_corner(omega_over_2pi: float, attenuation_db: float, order: int) -> float:
    """Butterworth corner giving |attenuation_db| of suppression at Omega.

    f_M = (Omega/2pi) * 10^(-|A|/(20*n)), from the filter's asymptotic
    -20*n dB/decade slope.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    if omega_over_2pi <= 0.0:
        raise ValueError("omega_over_2pi must be > 0")
    return omega_over_2pi * 10.0 ** (-abs(attenuation_db) / (20.0 * order))


def demod_filter_requirement(
    omega_over_2pi: float, snr_target: float, order: int, beta: float | None = None
) -> float:
    """Post-mixer low-pass corner f_M meeting an SNR target at Omega.

    beta defaults to the slope-maximizing modulation depth.  At
    snr_target = 1e3 and order 8 with Omega/2pi = 20 MHz this lands at
    ~9 MHz, at the price of tens of degrees of phase lag near 1 MHz.
    """
    if beta is None:
        beta = optimal_beta()
    att = required_attenuation_db(beta, snr_target)
    return demod_filter_corner(omega_over_2pi, att, order)
