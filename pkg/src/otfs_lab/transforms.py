"""DD <-> TF <-> time transforms, TF windows and PAPR.

Grids are complex arrays of shape ``(..., M, N)``: axis -2 is delay bin ``l``
(DD) or subcarrier ``m`` (TF), axis -1 is Doppler bin ``k`` or slot ``n``.
Leading axes are batch axes, which lets the channel module probe many
impulses in one call. Time signals have shape ``(..., N * (M + cp_len))``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .params import OtfsFrameParams


class WindowKind(enum.Enum):
    RECTANGULAR = "rect"
    DOLPH_CHEBYSHEV = "dc"


class WindowSite(enum.Enum):
    TRANSMITTER = "tx"
    RECEIVER = "rx"


@dataclass(frozen=True)
class WindowSpec:
    kind: WindowKind = WindowKind.RECTANGULAR
    attenuation_db: float = 60.0
    applied_at: WindowSite = WindowSite.TRANSMITTER

    def __post_init__(self):
        if self.kind is WindowKind.DOLPH_CHEBYSHEV and not 20 <= self.attenuation_db <= 120:
            raise ValueError("Dolph-Chebyshev attenuation must lie in [20, 120] dB")

    @property
    def is_rectangular(self) -> bool:
        return self.kind is WindowKind.RECTANGULAR

    @classmethod
    def parse(cls, kind: str, attenuation_db: float = 60.0, applied_at: str = "tx") -> "WindowSpec":
        return cls(WindowKind(kind), float(attenuation_db), WindowSite(applied_at))


RECTANGULAR = WindowSpec()


def _check_grid(x, params: OtfsFrameParams | None) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 2:
        raise ValueError(f"grid must be at least 2-D, got shape {x.shape}")
    if params is not None and x.shape[-2:] != (params.M, params.N):
        raise ValueError(f"grid shape {x.shape[-2:]} does not match (M, N) = ({params.M}, {params.N})")
    if not np.all(np.isfinite(x)):
        raise ValueError("grid has non-finite entries")
    return x


def isfft(dd, params: OtfsFrameParams | None = None) -> np.ndarray:
    """Unitary inverse symplectic FFT.

    X[m, n] = 1/sqrt(MN) sum_{k,l} x[l, k] exp(j2pi(nk/N - ml/M))
    """
    x = _check_grid(dd, params)
    return np.fft.ifft(np.fft.fft(x, axis=-2, norm="ortho"), axis=-1, norm="ortho")


def sfft(tf, params: OtfsFrameParams | None = None) -> np.ndarray:
    """Inverse of :func:`isfft`."""
    X = _check_grid(tf, params)
    return np.fft.fft(np.fft.ifft(X, axis=-2, norm="ortho"), axis=-1, norm="ortho")


def heisenberg_modulate(tf, params: OtfsFrameParams) -> np.ndarray:
    """CP-OFDM modulator: unitary M-point IDFT per slot, one CP per slot."""
    X = _check_grid(tf, params)
    payload = np.fft.ifft(X, axis=-2, norm="ortho")  # (..., M, N), axis -2 = sample in slot
    cp = params.cp_len
    if cp:
        payload = np.concatenate([payload[..., -cp:, :], payload], axis=-2)
    slots = np.swapaxes(payload, -1, -2)  # (..., N, M + cp)
    return slots.reshape(*slots.shape[:-2], params.samples_per_frame)


def wigner_demodulate(ts, params: OtfsFrameParams) -> np.ndarray:
    """Drop each slot's CP and apply the unitary M-point DFT."""
    s = np.asarray(ts)
    if s.shape[-1:] != (params.samples_per_frame,):
        raise ValueError(
            f"signal length {s.shape[-1:]} does not match N*(M+cp) = {params.samples_per_frame}"
        )
    slots = s.reshape(*s.shape[:-1], params.N, params.M + params.cp_len)[..., params.cp_len:]
    return np.fft.fft(np.swapaxes(slots, -1, -2), axis=-2, norm="ortho")


def chebyshev_poly(order: int, x) -> np.ndarray:
    """T_order(x) for real x of any magnitude."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    inner = np.abs(x) <= 1
    out[inner] = np.cos(order * np.arccos(x[inner]))
    big = x > 1
    out[big] = np.cosh(order * np.arccosh(x[big]))
    neg = x < -1
    out[neg] = (-1) ** order * np.cosh(order * np.arccosh(-x[neg]))
    return out


def dolph_chebyshev_window(length: int, attenuation_db: float) -> np.ndarray:
    """Dolph-Chebyshev taper with equiripple sidelobes ``attenuation_db`` below the peak.

    Built from samples of the Chebyshev polynomial on the unit circle and an
    inverse DFT centred on ``(length - 1) / 2``; normalised to unit peak.
    """
    if int(length) != length or length < 2:
        raise ValueError("length must be an integer >= 2")
    if not 20 <= attenuation_db <= 120:
        raise ValueError("attenuation_db must lie in [20, 120]")
    L = int(length)
    order = L - 1
    x0 = math.cosh(math.acosh(10 ** (attenuation_db / 20)) / order)
    k = np.arange(L)
    spectrum = chebyshev_poly(order, x0 * np.cos(np.pi * k / L))
    centre = (L - 1) / 2
    w = np.real(np.fft.ifft(spectrum * np.exp(-2j * np.pi * k * centre / L))) * L
    w = w / np.max(w)
    # Enforce exact symmetry; the two halves agree to rounding already.
    return 0.5 * (w + w[::-1])


def mainlobe_halfwidth_bins(length: int, attenuation_db: float) -> float:
    """Half-width of the Dolph-Chebyshev main lobe, in DFT bins of ``length`` points."""
    x0 = math.cosh(math.acosh(10 ** (attenuation_db / 20)) / (length - 1))
    return 2 * math.acos(1 / x0) * length / (2 * math.pi)


def window_spill(length: int, spec: WindowSpec) -> int:
    """Bins by which a window's main lobe widens an on-grid response."""
    if spec.is_rectangular:
        return 0
    return math.ceil(mainlobe_halfwidth_bins(length, spec.attenuation_db))


def taper(length: int, spec: WindowSpec) -> np.ndarray:
    if spec.is_rectangular:
        return np.ones(length)
    return dolph_chebyshev_window(length, spec.attenuation_db)


def window_2d(params: OtfsFrameParams, spec: WindowSpec) -> np.ndarray:
    """Separable TF window scaled so that ||W||_F^2 = MN."""
    W = np.outer(taper(params.M, spec), taper(params.N, spec))
    return W * math.sqrt(params.size / np.sum(W**2))


def apply_tf_window(tf, spec: WindowSpec, params: OtfsFrameParams) -> np.ndarray:
    X = _check_grid(tf, params)
    if spec.is_rectangular:
        return X.copy()
    return X * window_2d(params, spec)


def papr_db(ts) -> float:
    s = np.asarray(ts)
    power = np.abs(s) ** 2
    mean = power.mean()
    if mean == 0:
        raise ValueError("PAPR of an all-zero signal is undefined")
    return 10 * math.log10(power.max() / mean)


def otfs_modulate(dd, params: OtfsFrameParams, window: WindowSpec = RECTANGULAR) -> np.ndarray:
    """DD grid -> transmitted time signal (ISFFT, optional TX window, CP-OFDM)."""
    X = isfft(dd, params)
    if window.applied_at is WindowSite.TRANSMITTER:
        X = apply_tf_window(X, window, params)
    return heisenberg_modulate(X, params)


def otfs_demodulate(ts, params: OtfsFrameParams, window: WindowSpec = RECTANGULAR) -> np.ndarray:
    """Received time signal -> DD grid (CP-OFDM demodulation, optional RX window, SFFT)."""
    Y = wigner_demodulate(ts, params)
    if window.applied_at is WindowSite.RECEIVER:
        Y = apply_tf_window(Y, window, params)
    return sfft(Y, params)


def vec(grid) -> np.ndarray:
    """Column-major flattening: index ``l + M * k``."""
    g = np.asarray(grid)
    return np.swapaxes(g, -1, -2).reshape(*g.shape[:-2], -1)


def unvec(v, M: int, N: int) -> np.ndarray:
    v = np.asarray(v)
    return np.swapaxes(v.reshape(*v.shape[:-1], N, M), -1, -2)
