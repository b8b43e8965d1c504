"""Frame geometry, mobility and link-budget arithmetic."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

SPEED_OF_LIGHT = 299_792_458.0
SPEED_OF_LIGHT_COMPAT = 3e8


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class OtfsFrameParams:
    """Delay-Doppler grid of M delay bins by N Doppler bins.

    ``T`` defaults to ``1 / delta_f`` (critical sampling). ``cp_len`` is the
    per-slot cyclic prefix in samples at rate ``M * delta_f``.
    """

    M: int
    N: int
    delta_f: float = 15e3
    fc: float = 4e9
    cp_len: int = 0
    T: float | None = field(default=None)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError(f"M must be an integer >= 2, got {self.M!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be an integer >= 1, got {self.N!r}")
        _check_finite(delta_f=self.delta_f, fc=self.fc)
        if self.delta_f <= 0 or self.fc <= 0:
            raise ValueError("delta_f and fc must be positive")
        if int(self.cp_len) != self.cp_len or not 0 <= self.cp_len < self.M:
            raise ValueError(f"cp_len must be an integer in [0, M), got {self.cp_len!r}")
        if self.T is None:
            object.__setattr__(self, "T", 1.0 / self.delta_f)
        elif abs(self.T * self.delta_f - 1.0) > 1e-12:
            raise ValueError("T * delta_f must equal 1")

    @property
    def sample_rate(self) -> float:
        return self.M * self.delta_f

    @property
    def sample_period(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def frame_duration(self) -> float:
        return self.N * self.T

    @property
    def bandwidth(self) -> float:
        return self.M * self.delta_f

    @property
    def slot_duration(self) -> float:
        """Slot length on air, cyclic prefix included."""
        return (self.M + self.cp_len) * self.sample_period

    @property
    def delay_resolution(self) -> float:
        return 1.0 / self.bandwidth

    @property
    def doppler_resolution(self) -> float:
        # One Doppler bin advances the phase by 2*pi/N per transmitted slot.
        return 1.0 / (self.N * self.slot_duration)

    @property
    def samples_per_frame(self) -> int:
        return self.N * (self.M + self.cp_len)

    @property
    def size(self) -> int:
        return self.M * self.N

    def with_cp(self, cp_len: int) -> "OtfsFrameParams":
        return OtfsFrameParams(self.M, self.N, self.delta_f, self.fc, cp_len)


@dataclass(frozen=True)
class MobilityParams:
    v: float
    fc: float
    c_rounded: bool = False

    def __post_init__(self):
        _check_finite(v=self.v, fc=self.fc)
        if self.v < 0:
            raise ValueError("v must be >= 0")
        if self.fc <= 0:
            raise ValueError("fc must be positive")

    @property
    def c(self) -> float:
        return SPEED_OF_LIGHT_COMPAT if self.c_rounded else SPEED_OF_LIGHT

    @property
    def wavelength(self) -> float:
        return self.c / self.fc

    @property
    def max_doppler(self) -> float:
        return max_doppler_shift(self.fc, self.v, self.c)


def kmh(v_kmh: float) -> float:
    return v_kmh / 3.6


def max_doppler_shift(fc: float, v: float, c: float = SPEED_OF_LIGHT) -> float:
    """Maximum Doppler shift ``fc * v / c`` in Hz."""
    _check_finite(fc=fc, v=v, c=c)
    if fc <= 0 or c <= 0 or v < 0:
        raise ValueError("need fc > 0, c > 0 and v >= 0")
    return fc * v / c


def coherence_time(nu_max: float) -> float:
    """Coherence time approximated as ``1 / (4 nu_max)``."""
    _check_finite(nu_max=nu_max)
    if nu_max <= 0:
        raise ValueError("nu_max must be positive")
    return 1.0 / (4.0 * nu_max)


@dataclass(frozen=True)
class SymbolFit:
    symbol_duration: float
    count: int


def symbols_per_coherence(coh_time: float, delta_f: float, cp_fraction: float) -> SymbolFit:
    """Whole OFDM symbols (CP included) fitting in one coherence interval."""
    _check_finite(coh_time=coh_time, delta_f=delta_f, cp_fraction=cp_fraction)
    if coh_time <= 0 or delta_f <= 0:
        raise ValueError("coh_time and delta_f must be positive")
    if not 0 <= cp_fraction < 1:
        raise ValueError("cp_fraction must lie in [0, 1)")
    duration = (1.0 / delta_f) * (1.0 + cp_fraction)
    # Guard the floor against representation error at exact multiples.
    count = math.floor(coh_time / duration * (1 + 1e-12))
    return SymbolFit(duration, count)


def spectral_efficiency(eta: float, Rc: float, mod_order: int) -> float:
    """Bits/s/Hz carried by a frame with overhead ``eta`` and code rate ``Rc``."""
    _check_finite(eta=eta, Rc=Rc, mod_order=mod_order)
    if not 0 <= eta < 1:
        raise ValueError("eta must lie in [0, 1)")
    if not 0 < Rc <= 1:
        raise ValueError("Rc must lie in (0, 1]")
    if mod_order < 2:
        raise ValueError("mod_order must be >= 2")
    return (1.0 - eta) * Rc * math.log2(mod_order)


@dataclass(frozen=True)
class Compactness:
    satisfied: bool
    product: float


def compactness_check(tau_max: float, nu_max: float) -> Compactness:
    """Check the underspread condition ``4 tau_max nu_max <= 1`` (inclusive)."""
    _check_finite(tau_max=tau_max, nu_max=nu_max)
    if tau_max < 0 or nu_max < 0:
        raise ValueError("tau_max and nu_max must be >= 0")
    product = 4.0 * tau_max * nu_max
    return Compactness(product <= 1.0, product)
