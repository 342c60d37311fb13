"""Complex frequency-response primitives and composition.

Every loop element is modeled as a node that evaluates to a complex
response at Fourier frequency f (Hz), using the s = j*2*pi*f convention.
Gain is reported in dB as 20*log10(|H|), phase in degrees at I/O
boundaries (radians internally).  All models are immutable and pure, so
they can be evaluated concurrently without locking.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "SPEED_OF_LIGHT_M_PER_S",
    "COAX_VELOCITY_FACTOR",
    "FIBER_GROUP_INDEX",
    "TransferModel",
    "Gain",
    "Pid",
    "Integrator",
    "LowPassFirstOrder",
    "LowPassButterworth",
    "FirstOrderHighPass",
    "Delay",
    "CavityPole",
    "PdLockin",
    "Product",
    "Tabulated",
    "BodeTrace",
    "gain_db",
    "phase_deg",
    "eval_pid",
    "eval_lowpass_butterworth",
    "butterworth_phase_approx_deg",
    "eval_delay",
    "eval_cavity",
    "eval_pd_lockin",
    "compose",
    "log_grid",
    "bode_grid",
    "path_delay",
]

SPEED_OF_LIGHT_M_PER_S = 299792458.0
# Cable constants used to convert physical path lengths into delay.
COAX_VELOCITY_FACTOR = 0.66
FIBER_GROUP_INDEX = 1.468


def _as_freq_array(f) -> np.ndarray:
    """Validate and broadcast a frequency argument (must be > 0)."""
    arr = np.asarray(f, dtype=float)
    if arr.size == 0:
        raise ValueError("empty frequency array")
    if np.any(arr <= 0.0) or not np.all(np.isfinite(arr)):
        raise ValueError("frequencies must be finite and > 0 Hz")
    return arr


def gain_db(response) -> np.ndarray | float:
    """20*log10(|H|) of a complex response."""
    return 20.0 * np.log10(np.abs(response))


def phase_deg(response) -> np.ndarray | float:
    """Phase of a complex response in degrees, wrapped to (-180, 180]."""
    return np.degrees(np.angle(response))


class TransferModel:
    """Base class for frequency-response nodes.

    Subclasses implement ``response(f)`` for scalar or ndarray f (Hz) and
    must be pure functions of their constructor parameters.
    """

    def response(self, f):
        raise NotImplementedError

    def at(self, f: float) -> complex:
        """Scalar evaluation convenience."""
        return complex(self.response(float(f)))

    def __mul__(self, other: "TransferModel") -> "Product":
        return compose([self, other])


@dataclass(frozen=True)
class Gain(TransferModel):
    """Frequency-independent scalar gain (optionally unit-carrying, e.g. V/Hz)."""

    k: float
    label: str = ""

    def response(self, f):
        f = np.asarray(f, dtype=float)
        return np.full(f.shape, self.k, dtype=complex) if f.ndim else complex(self.k)


@dataclass(frozen=True)
class Pid(TransferModel):
    """PID loop filter K_P * (1 - j*f_I/f + j*f/f_D).

    f_d=None disables the derivative term.  f_i=0 disables the integrator
    (pure proportional).  The integrator adds -90 deg of lag for f << f_I;
    the derivative adds up to +90 deg of lead for f >> f_D.
    """

    k_p: float
    f_i: float = 0.0
    f_d: float | None = None

    def __post_init__(self):
        if self.k_p <= 0.0:
            raise ValueError("k_p must be > 0")
        if self.f_i < 0.0:
            raise ValueError("f_i must be >= 0")
        if self.f_d is not None and self.f_d <= 0.0:
            raise ValueError("f_d must be > 0 (or None to disable)")

    def response(self, f):
        f = _as_freq_array(f)
        h = 1.0 - 1j * self.f_i / f
        if self.f_d is not None:
            h = h + 1j * f / self.f_d
        return self.k_p * h


@dataclass(frozen=True)
class Integrator(TransferModel):
    """Pure integrator -j*f_i/f (the slow-branch loop filter)."""

    f_i: float

    def __post_init__(self):
        if self.f_i < 0.0:
            raise ValueError("f_i must be >= 0")

    def response(self, f):
        f = _as_freq_array(f)
        return -1j * self.f_i / f


def _butterworth_poles(order: int) -> np.ndarray:
    """Left-half-plane unit-circle poles of the normalized Butterworth filter."""
    k = np.arange(1, order + 1)
    return np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))


@dataclass(frozen=True)
class LowPassButterworth(TransferModel):
    """n-th order Butterworth low-pass with corner f0, via the exact pole product.

    |H(f0)| is -3.0103 dB for every order; the asymptotic slope is
    -20*n dB/decade.  The often-quoted phase approximation
    -n*arctan(f/f0) is NOT used here because it badly overestimates the
    lag well below the corner (see butterworth_phase_approx_deg).
    """

    order: int
    f0: float

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.f0 <= 0.0:
            raise ValueError("f0 must be > 0")

    def response(self, f):
        f = _as_freq_array(f)
        s = 1j * f / self.f0
        poles = _butterworth_poles(self.order)
        # DC gain is 1 because prod(-poles) == 1 for unit-circle poles.
        return 1.0 / np.prod(s[..., None] - poles, axis=-1)


def LowPassFirstOrder(f0: float) -> LowPassButterworth:
    """First-order low-pass 1/(1 + j*f/f0)."""
    return LowPassButterworth(order=1, f0=f0)


@dataclass(frozen=True)
class FirstOrderHighPass(TransferModel):
    """First-order high-pass (j*f/f0)/(1 + j*f/f0)."""

    f0: float

    def __post_init__(self):
        if self.f0 <= 0.0:
            raise ValueError("f0 must be > 0")

    def response(self, f):
        f = _as_freq_array(f)
        x = 1j * f / self.f0
        return x / (1.0 + x)


@dataclass(frozen=True)
class Delay(TransferModel):
    """Propagation delay exp(-j*2*pi*f*tau): unit magnitude, linear phase lag."""

    tau: float

    def __post_init__(self):
        if self.tau < 0.0:
            raise ValueError("tau must be >= 0")

    def response(self, f):
        f = np.asarray(f, dtype=float)
        return np.exp(-2j * np.pi * f * self.tau)


@dataclass(frozen=True)
class CavityPole(TransferModel):
    """Reflected-light response of the reference cavity, 1/(1 + j*2*f/delta_nu_c).

    The corner frequency is half the cavity FWHM linewidth delta_nu_c.
    """

    delta_nu_c: float

    def __post_init__(self):
        if self.delta_nu_c <= 0.0:
            raise ValueError("delta_nu_c must be > 0")

    def response(self, f):
        f = np.asarray(f, dtype=float)
        return 1.0 / (1.0 + 2j * f / self.delta_nu_c)


@dataclass(frozen=True)
class PdLockin(TransferModel):
    """Photodetector phase response as seen through the mixer.

    The demodulated signal at Fourier frequency f carries the average of
    the PD phase lags at the two RF sidebands Omega/2pi +- f, with the
    demodulation phase chosen to null the lag at the carrier:

        phase(f) = [L_pd(Omega/2pi + f) - L_pd(Omega/2pi - f)] / 2

    where L_pd(x) = -order*arctan(x/f_pd).  The PD gain is absorbed into
    the discriminator slope, so |P| = 1.  Only valid for 0 < f < Omega/2pi.
    """

    order: int
    f_pd: float
    omega_over_2pi: float

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        if self.f_pd <= 0.0:
            raise ValueError("f_pd must be > 0")
        if self.omega_over_2pi <= 0.0:
            raise ValueError("omega_over_2pi must be > 0")

    def _lag_rad(self, x):
        return -self.order * np.arctan(np.asarray(x, dtype=float) / self.f_pd)

    def response(self, f):
        f = _as_freq_array(f)
        if np.any(f >= self.omega_over_2pi):
            raise ValueError(
                "pd lock-in model is only valid for f < omega_over_2pi "
                f"({self.omega_over_2pi:g} Hz)"
            )
        fo = self.omega_over_2pi
        phi = 0.5 * (self._lag_rad(fo + f) - self._lag_rad(fo - f))
        return np.exp(1j * phi)


@dataclass(frozen=True)
class Product(TransferModel):
    """Series composition: response is the complex product of the factors."""

    factors: tuple[TransferModel, ...]

    def __post_init__(self):
        if len(self.factors) == 0:
            raise ValueError("Product needs at least one factor")

    def response(self, f):
        out = self.factors[0].response(f)
        for m in self.factors[1:]:
            out = out * m.response(f)
        return out


@dataclass
class BodeTrace:
    """A sampled frequency response: strictly increasing freqs + complex values.

    The phase property is unwrapped by nearest-multiple-of-360 continuation
    from the lowest frequency upward.
    """

    freqs: np.ndarray
    response: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.freqs = np.asarray(self.freqs, dtype=float)
        self.response = np.asarray(self.response, dtype=complex)
        if self.freqs.ndim != 1 or self.response.ndim != 1:
            raise ValueError("freqs and response must be 1-D")
        if self.freqs.shape != self.response.shape:
            raise ValueError("freqs and response lengths differ")
        if np.any(self.freqs <= 0.0):
            raise ValueError("trace frequencies must be > 0 Hz")
        if np.any(np.diff(self.freqs) <= 0.0):
            raise ValueError("trace frequencies must be strictly increasing")

    @classmethod
    def from_gain_phase(cls, freqs, gains_db, phases_deg, label: str = "") -> "BodeTrace":
        g = np.asarray(gains_db, dtype=float)
        p = np.radians(np.asarray(phases_deg, dtype=float))
        return cls(np.asarray(freqs, dtype=float), 10.0 ** (g / 20.0) * np.exp(1j * p), label)

    def __len__(self) -> int:
        return len(self.freqs)

    @property
    def gain_db(self) -> np.ndarray:
        return 20.0 * np.log10(np.abs(self.response))

    @property
    def phase_rad(self) -> np.ndarray:
        return np.unwrap(np.angle(self.response))

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(self.phase_rad)

    def with_label(self, label: str) -> "BodeTrace":
        return BodeTrace(self.freqs, self.response, label)


@dataclass
class Tabulated(TransferModel):
    """Measured (or precomputed) response, interpolated on its own grid.

    Interpolation is linear in log10(f) for both gain_dB and unwrapped
    phase.  Evaluation outside the tabulated range is an error, never an
    extrapolation.
    """

    trace: BodeTrace
    _gain_db: np.ndarray = field(init=False, repr=False)
    _phase_deg: np.ndarray = field(init=False, repr=False)
    _logf: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self._gain_db = self.trace.gain_db
        self._phase_deg = self.trace.phase_deg
        self._logf = np.log10(self.trace.freqs)

    def response(self, f):
        f = _as_freq_array(f)
        lo, hi = self.trace.freqs[0], self.trace.freqs[-1]
        if np.any(f < lo) or np.any(f > hi):
            raise ValueError(
                f"frequency outside tabulated range [{lo:g}, {hi:g}] Hz; refusing to extrapolate"
            )
        lf = np.log10(f)
        g = np.interp(lf, self._logf, self._gain_db)
        p = np.interp(lf, self._logf, self._phase_deg)
        return 10.0 ** (g / 20.0) * np.exp(1j * np.radians(p))


# -- functional wrappers ----------------------------------------------------

def eval_pid(k_p: float, f_i: float, f_d: float | None, f):
    """K_P*(1 - j*f_I/f + j*f/f_D); pass f_d=None for PI-only."""
    return Pid(k_p, f_i, f_d).response(f)


def eval_lowpass_butterworth(order: int, f0: float, f):
    """Exact n-th order Butterworth low-pass response at f."""
    return LowPassButterworth(order, f0).response(f)


def butterworth_phase_approx_deg(order: int, f0: float, f):
    """The -n*arctan(f/f0) phase approximation, in degrees.

    Kept only for comparison: at f = f0/9 and n = 8 it predicts -51 deg
    where the exact pole product gives -33 deg.  Do not use it to budget
    loop phase.
    """
    return -order * np.degrees(np.arctan(np.asarray(f, dtype=float) / f0))


def eval_delay(tau: float, f):
    """exp(-j*2*pi*f*tau)."""
    return Delay(tau).response(f)


def eval_cavity(delta_nu_c: float, f):
    """Cavity reflection low-pass 1/(1 + j*2*f/delta_nu_c)."""
    return CavityPole(delta_nu_c).response(f)


def eval_pd_lockin(order: int, f_pd: float, omega_over_2pi: float, f):
    """PD phase response under lock-in demodulation (unit magnitude)."""
    return PdLockin(order, f_pd, omega_over_2pi).response(f)


def compose(models: Iterable[TransferModel]) -> Product:
    """Series composition of models; evaluation is the complex product."""
    factors = tuple(models)
    if not factors:
        raise ValueError("compose() needs at least one model")
    return Product(factors)


def log_grid(f_min: float, f_max: float, points_per_decade: int = 100) -> np.ndarray:
    """Strictly increasing log-spaced grid covering [f_min, f_max]."""
    if not (0.0 < f_min < f_max):
        raise ValueError("need 0 < f_min < f_max")
    if points_per_decade < 1:
        raise ValueError("points_per_decade must be >= 1")
    decades = np.log10(f_max / f_min)
    n = max(2, int(round(decades * points_per_decade)) + 1)
    return np.logspace(np.log10(f_min), np.log10(f_max), n)


def bode_grid(
    model: TransferModel,
    f_min: float = 10.0,
    f_max: float = 10e6,
    points_per_decade: int = 100,
    label: str = "",
) -> BodeTrace:
    """Evaluate a model on a log grid.

    Defaults span 10 Hz - 10 MHz (the usual VNA sweep for these loops) at
    100 points/decade, dense enough that the unwrapped phase has no
    spurious 360-degree jumps for any model in this module.
    """
    f = log_grid(f_min, f_max, points_per_decade)
    return BodeTrace(f, np.asarray(model.response(f), dtype=complex), label)


def path_delay(free_space_m: float = 0.0, fiber_m: float = 0.0, coax_m: float = 0.0) -> float:
    """Propagation delay (s) of a signal path split across media.

    Coax uses velocity factor 0.66 and fiber a group index of 1.468;
    10 m of coax comes out at 50.5 ns (an 18-degree lag at 1 MHz).
    """
    if min(free_space_m, fiber_m, coax_m) < 0.0:
        raise ValueError("path lengths must be >= 0")
    c = SPEED_OF_LIGHT_M_PER_S
    return free_space_m / c + fiber_m * FIBER_GROUP_INDEX / c + coax_m / (COAX_VELOCITY_FACTOR * c)
