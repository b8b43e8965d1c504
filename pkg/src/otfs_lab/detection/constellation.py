from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

LLR_CLAMP = 30.0


def _gray_pam(bits_per_axis: int) -> np.ndarray:
    """PAM levels indexed by Gray label, unnormalised (odd integers)."""
    n = 1 << bits_per_axis
    levels = np.empty(n)
    for pos in range(n):
        gray = pos ^ (pos >> 1)
        levels[gray] = 2 * pos - (n - 1)
    return levels


@dataclass(frozen=True)
class Constellation:
    """Gray-labelled square QAM (or BPSK) with unit average energy.

    ``points[i]`` carries the bit label ``i`` written MSB first; bit value 0
    maps to the positive half-axis.
    """

    order: int
    points: np.ndarray = field(init=False, repr=False)
    labels: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        q = self.order
        if q < 2 or q & (q - 1):
            raise ValueError("order must be a power of two >= 2")
        b = int(math.log2(q))
        if q == 2:
            pts = np.array([1.0, -1.0], dtype=complex)
        else:
            if b % 2:
                raise ValueError("only square QAM orders are supported")
            pam = -_gray_pam(b // 2)
            idx = np.arange(q)
            pts = pam[idx >> (b // 2)] + 1j * pam[idx & ((1 << (b // 2)) - 1)]
            pts = pts / math.sqrt(np.mean(np.abs(pts) ** 2))
        labels = (np.arange(q)[:, None] >> np.arange(b - 1, -1, -1)[None, :]) & 1
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", labels.astype(np.int8))

    @property
    def bits_per_symbol(self) -> int:
        return int(math.log2(self.order))

    def modulate(self, bits) -> np.ndarray:
        return self.points[self.bits_to_indices(bits)]

    def bits_to_indices(self, bits) -> np.ndarray:
        b = np.asarray(bits, dtype=np.int64).reshape(-1, self.bits_per_symbol)
        weights = 1 << np.arange(self.bits_per_symbol - 1, -1, -1)
        return b @ weights

    def indices_to_bits(self, idx) -> np.ndarray:
        return self.labels[np.asarray(idx)].reshape(-1)

    def nearest(self, z) -> np.ndarray:
        z = np.asarray(z)
        return np.argmin(np.abs(z[..., None] - self.points) ** 2, axis=-1)


QPSK = Constellation(4)


def gaussian_posteriors(z, bias, var, constellation: Constellation) -> np.ndarray:
    """p(a) proportional to exp(-|z - bias * a|^2 / var), per entry of ``z``."""
    z = np.asarray(z)[..., None]
    bias = np.asarray(bias)[..., None]
    var = np.maximum(np.asarray(var, dtype=float), 1e-300)[..., None]
    logp = -np.abs(z - bias * constellation.points) ** 2 / var
    return softmax(logp)


def softmax(logp) -> np.ndarray:
    logp = logp - np.max(logp, axis=-1, keepdims=True)
    p = np.exp(logp)
    return p / p.sum(axis=-1, keepdims=True)


def soft_demap(posteriors, constellation: Constellation) -> np.ndarray:
    """Per-bit LLR log(P(b=0)/P(b=1)), clamped to +-30; bits MSB first per symbol."""
    p = np.asarray(posteriors, dtype=float)
    zero = constellation.labels == 0  # (Q, b)
    p0 = p @ zero
    p1 = p @ ~zero
    with np.errstate(divide="ignore"):
        llr = np.log(p0) - np.log(p1)
    return np.clip(np.nan_to_num(llr, nan=0.0), -LLR_CLAMP, LLR_CLAMP).reshape(-1)
