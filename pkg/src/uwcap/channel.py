"""Acoustic channel laws evaluated in log domain.

Frequencies are in kHz and distances in grid units. One grid unit is
``unit_km`` kilometres, so the dB/km absorption law is rescaled to a
per-unit exponent before it enters the attenuation ``A(r, f)``.

Powers, gains and attenuations are carried as natural logarithms because
``a(f) ** r`` overflows a double long before ``r`` reaches the network
diameters of interest.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .errors import ConfigError, DomainError

LN10_OVER_10 = math.log(10.0) / 10.0
LN2 = math.log(2.0)


@dataclass(frozen=True, order=True)
class LogValue:
    """A nonnegative real stored as its natural logarithm.

    ``-inf`` encodes an exact zero. NaN and ``+inf`` are rejected.
    """

    ln_value: float

    def __post_init__(self):
        v = float(self.ln_value)
        if math.isnan(v) or v == math.inf:
            raise DomainError(f"LogValue must be finite or -inf, got {v}")
        object.__setattr__(self, "ln_value", v)

    @classmethod
    def from_value(cls, x: float) -> "LogValue":
        if x < 0 or math.isnan(x):
            raise DomainError(f"LogValue holds nonnegative reals, got {x}")
        return cls(math.log(x) if x > 0 else -math.inf)

    @property
    def value(self) -> float:
        return math.exp(self.ln_value)

    @property
    def log2_value(self) -> float:
        return self.ln_value / LN2

    @property
    def is_zero(self) -> bool:
        return self.ln_value == -math.inf

    def __mul__(self, other: "LogValue") -> "LogValue":
        return LogValue(self.ln_value + other.ln_value)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.is_zero:
            raise DomainError("division by a zero LogValue")
        return LogValue(self.ln_value - other.ln_value)

    def __add__(self, other: "LogValue") -> "LogValue":
        return LogValue(float(np.logaddexp(self.ln_value, other.ln_value)))

    def __pow__(self, exponent: float) -> "LogValue":
        if self.is_zero:
            return self if exponent > 0 else LogValue(0.0)
        return LogValue(self.ln_value * exponent)

    def __float__(self) -> float:
        return self.value


def log_sum_exp(values: Iterable[Union[LogValue, float]]) -> LogValue:
    """Return ``ln(sum(exp(v)))`` using the max-shift trick.

    ``-inf`` entries (exact zeros) are dropped. An empty input is the log of
    an empty sum, i.e. ``-inf``.
    """
    arr = np.array(
        [v.ln_value if isinstance(v, LogValue) else float(v) for v in values],
        dtype=float,
    )
    if np.isnan(arr).any():
        raise DomainError("log_sum_exp received NaN")
    arr = arr[arr > -np.inf]
    if arr.size == 0:
        return LogValue(-math.inf)
    if arr.size == 1:
        return LogValue(arr[0])
    shift = arr.max()
    if shift == np.inf:
        raise DomainError("log_sum_exp received +inf")
    return LogValue(shift + math.log(np.exp(arr - shift).sum()))


@dataclass(frozen=True)
class AbsorptionProfile:
    """Coefficients of the empirical absorption and noise laws.

    Defaults are the widely used Thorp-type absorption coefficients
    (dB/km, f in kHz) with a 50 dB noise level and a noise decay of 1.8.
    They are conventions, not fitted values.
    """

    a0: float = 0.003
    a1: float = 2.75e-4
    a2: float = 0.11
    a3: float = 44.0
    b1: float = 1.0
    b2: float = 4100.0
    a4: float = 50.0
    a5: float = 1.8
    alpha: float = 1.5
    c0: float = 1.0
    unit_km: float = 1.0

    def __post_init__(self):
        for name in ("a0", "a1", "a2", "a3", "b1", "b2", "a4", "a5", "alpha", "c0", "unit_km"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise ConfigError(f"{name} must be a finite number, got {v!r}")
            object.__setattr__(self, name, float(v))
        for name in ("a1", "a2", "a3", "b1", "b2", "a5", "c0", "unit_km"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0, got {getattr(self, name)}")
        if self.a0 < 0:
            raise ConfigError(f"a0 must be >= 0, got {self.a0}")
        if not 1.0 <= self.alpha <= 2.0:
            raise ConfigError(f"alpha must lie in the valid range [1, 2], got {self.alpha}")

    @property
    def c1(self) -> float:
        """Asymptotic exponent: ``ln a(f) ~ c1 * f**2`` per grid unit."""
        return LN10_OVER_10 * self.a1 * self.unit_km

    def at(self, f: float) -> "ChannelState":
        """Freeze the channel at carrier frequency ``f`` (kHz)."""
        return ChannelState(
            ln_a=absorption_ln_per_unit(self, f),
            ln_noise=noise_psd_ln(self, f).ln_value,
            alpha=self.alpha,
            c0=self.c0,
            f_khz=float(f),
        )


@dataclass(frozen=True)
class ChannelState:
    """The channel at one carrier frequency: everything the network layers need."""

    ln_a: float
    ln_noise: float
    alpha: float
    c0: float = 1.0
    f_khz: float = math.nan

    @classmethod
    def from_parameters(cls, ln_a: float, alpha: float = 1.0, c0: float = 1.0,
                        ln_noise: float = 0.0) -> "ChannelState":
        return cls(ln_a=float(ln_a), ln_noise=float(ln_noise), alpha=float(alpha), c0=float(c0))

    @property
    def noise(self) -> LogValue:
        return LogValue(self.ln_noise)

    def ln_attenuation(self, r):
        """Vectorised ``ln A(r, f)``; ``r`` must be positive."""
        r = np.asarray(r, dtype=float)
        if np.any(r <= 0):
            raise DomainError("attenuation needs r > 0 (far field)")
        return math.log(self.c0) + self.alpha * np.log(r) + r * self.ln_a


def _check_frequency(f: float) -> None:
    if not f >= 0:
        raise DomainError(f"frequency must be >= 0 kHz, got {f}")


def absorption_db_per_km(profile: AbsorptionProfile, f: float) -> float:
    """Absorption ``10 log10 a(f)`` in dB/km for ``f`` in kHz."""
    _check_frequency(f)
    f2 = f * f
    p = profile
    return p.a0 + p.a1 * f2 + p.a2 * f2 / (p.b1 + f2) + p.a3 * f2 / (p.b2 + f2)


def absorption_ln_per_unit(profile: AbsorptionProfile, f: float) -> float:
    """``ln a(f)`` for one grid unit of propagation."""
    return absorption_db_per_km(profile, f) * LN10_OVER_10 * profile.unit_km


def noise_psd_ln(profile: AbsorptionProfile, f: float) -> LogValue:
    """Noise psd as a dB law: ``10 log10 N = a4 - a5 * 10 log10 f``."""
    if not f > 0:
        raise DomainError(f"noise psd needs f > 0 kHz, got {f}")
    return LogValue((profile.a4 - profile.a5 * 10.0 * math.log10(f)) * LN10_OVER_10)


def attenuation_ln(profile: AbsorptionProfile, r: float, f: float) -> LogValue:
    if not r > 0:
        raise DomainError(f"distance must be > 0 grid units, got {r}")
    ln_a = absorption_ln_per_unit(profile, f)
    return LogValue(math.log(profile.c0) + profile.alpha * math.log(r) + r * ln_a)


def channel_gain_sample(rng: np.random.Generator, ln_A: Union[LogValue, float]) -> complex:
    """One draw of ``exp(j theta) / sqrt(A)`` with theta uniform on [0, 2 pi)."""
    ln_A = ln_A.ln_value if isinstance(ln_A, LogValue) else float(ln_A)
    if not math.isfinite(ln_A):
        raise DomainError("channel gain needs a finite attenuation")
    theta = rng.uniform(0.0, 2.0 * math.pi)
    return complex(math.exp(-0.5 * ln_A) * np.exp(1j * theta))


def random_phases(rng: np.random.Generator, shape) -> np.ndarray:
    """Unit phasors with i.i.d. uniform phases."""
    return np.exp(1j * rng.uniform(0.0, 2.0 * math.pi, size=shape))


class ScheduleKind(str, enum.Enum):
    CONSTANT = "constant"
    POWER_LAW = "power_law"


@dataclass(frozen=True)
class FrequencySchedule:
    """Carrier frequency as a function of network size: ``f(n) = c_f * n**gamma_f``."""

    kind: ScheduleKind = ScheduleKind.POWER_LAW
    c_f: float = 1.0
    gamma_f: float | None = None

    def __post_init__(self):
        try:
            kind = ScheduleKind(self.kind)
        except ValueError:
            raise ConfigError(f"schedule kind must be one of {[k.value for k in ScheduleKind]}, "
                              f"got {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if not (isinstance(self.c_f, (int, float)) and self.c_f > 0):
            raise ConfigError(f"schedule c_f must be > 0, got {self.c_f!r}")
        if self.gamma_f is None:
            object.__setattr__(self, "gamma_f", 0.0 if kind is ScheduleKind.CONSTANT else TIGHT_GAMMA)
        if kind is ScheduleKind.CONSTANT:
            if self.gamma_f != 0:
                raise ConfigError("constant schedule forces gamma_f = 0")
        elif not (isinstance(self.gamma_f, (int, float)) and self.gamma_f >= 0):
            raise ConfigError(f"schedule gamma_f must be >= 0, got {self.gamma_f!r}")
        object.__setattr__(self, "c_f", float(self.c_f))
        object.__setattr__(self, "gamma_f", float(self.gamma_f))

    @classmethod
    def constant(cls, c_f: float) -> "FrequencySchedule":
        return cls(ScheduleKind.CONSTANT, c_f, 0.0)

    @classmethod
    def power_law(cls, c_f: float = 1.0, gamma_f: float = 0.25) -> "FrequencySchedule":
        return cls(ScheduleKind.POWER_LAW, c_f, gamma_f)

    def __call__(self, n: int) -> float:
        return self.c_f * float(n) ** self.gamma_f


class Regime(str, enum.Enum):
    BOUND_TIGHT = "bound_tight"
    BOUND_LOOSE = "bound_loose"


TIGHT_GAMMA = 0.25


def regime_classify(schedule: FrequencySchedule, profile: AbsorptionProfile | None = None) -> Regime:
    """Tight iff ``f`` grows at least like ``n**(1/4)`` (boundary included).

    With ``ln a(f) ~ c1 f**2`` that is exactly the condition for ``a(f)`` to
    outgrow ``(1 + eps0) ** sqrt(n)``. The profile only enters through
    ``c1 > 0``, which its own validation already guarantees.
    """
    if schedule.kind is ScheduleKind.POWER_LAW and schedule.gamma_f >= TIGHT_GAMMA:
        return Regime.BOUND_TIGHT
    return Regime.BOUND_LOOSE


def ln_log1p_exp(s):
    """``ln(ln(1 + exp(s)))`` without underflow for very negative ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    small = s < -30.0
    # ln(1+x) = x(1 - x/2 + ...), so ln ln(1+e^s) = s - e^s/2 + O(e^{2s})
    out[small] = s[small] - 0.5 * np.exp(s[small])
    big = ~small
    out[big] = np.log(np.logaddexp(0.0, s[big]))
    return out if out.ndim else float(out)
