"""Rate-1/2 convolutional code, soft Viterbi decoding and bit interleaving."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


def _parity(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.int64)
    out = np.zeros_like(x)
    while np.any(x):
        out ^= x & 1
        x = x >> 1
    return out


@dataclass(frozen=True)
class ConvCode:
    """Feed-forward code; generator MSB taps the current input bit."""

    constraint_length: int = 7
    generators: tuple[int, ...] = (0o171, 0o133)

    def __post_init__(self):
        if any(g <= 0 or g >= 1 << self.constraint_length for g in self.generators):
            raise ValueError("generators must be non-zero and fit the constraint length")

    @property
    def n_out(self) -> int:
        return len(self.generators)

    @property
    def rate(self) -> float:
        return 1.0 / self.n_out

    @property
    def tail(self) -> int:
        return self.constraint_length - 1

    @property
    def n_states(self) -> int:
        return 1 << self.tail

    def coded_length(self, msg_len: int) -> int:
        return self.n_out * (msg_len + self.tail)

    def message_length(self, coded_len: int) -> int:
        if coded_len % self.n_out:
            raise ValueError("coded length is not a multiple of the output count")
        return coded_len // self.n_out - self.tail

    @cached_property
    def trellis(self):
        """(prev_state[s', b], outputs[s', b, j]) for predecessor choice b."""
        K1 = self.tail
        s_next = np.arange(self.n_states)
        u = s_next >> (K1 - 1)
        prev = ((s_next[:, None] & ((1 << (K1 - 1)) - 1)) << 1) | np.arange(2)[None, :]
        reg = (u[:, None] << K1) | prev
        outs = np.stack([_parity(reg & g) for g in self.generators], axis=-1)
        return prev, outs, u


STANDARD_CODE = ConvCode()


def conv_encode(bits, code: ConvCode = STANDARD_CODE) -> np.ndarray:
    """Zero-tailed encoding; output length ``n_out * (len(bits) + K - 1)``."""
    u = np.asarray(bits, dtype=np.int64).reshape(-1)
    if u.size < 1:
        raise ValueError("need at least one input bit")
    u = np.concatenate([u, np.zeros(code.tail, dtype=np.int64)])
    K1 = code.tail
    # reg_t = u_t u_{t-1} ... u_{t-K+1}, MSB first
    padded = np.concatenate([np.zeros(K1, dtype=np.int64), u])
    reg = np.zeros(u.size, dtype=np.int64)
    for d in range(K1 + 1):
        reg |= padded[K1 - d: K1 - d + u.size] << (K1 - d)
    out = np.stack([_parity(reg & g) for g in code.generators], axis=-1)
    return out.reshape(-1).astype(np.int8)


def viterbi_decode(llrs, code: ConvCode = STANDARD_CODE) -> np.ndarray:
    """Maximise sum(llr * (1 - 2 bit)) over zero-tailed paths; ties go to the zero branch."""
    llr = np.asarray(llrs, dtype=float).reshape(-1)
    msg_len = code.message_length(llr.size)
    if msg_len < 1:
        raise ValueError("llr vector too short for one message bit")
    steps = msg_len + code.tail
    llr = llr.reshape(steps, code.n_out)
    prev, outs, _ = code.trellis
    signs = 1 - 2 * outs  # (S, 2, n_out)
    metric = np.full(code.n_states, -np.inf)
    metric[0] = 0.0
    choice = np.empty((steps, code.n_states), dtype=np.int8)
    for t in range(steps):
        cand = metric[prev] + signs @ llr[t]
        pick = (cand[:, 1] > cand[:, 0]).astype(np.int8)
        choice[t] = pick
        metric = np.where(pick, cand[:, 1], cand[:, 0])
    state = 0
    decided = np.empty(steps, dtype=np.int8)
    top = code.tail - 1
    for t in range(steps - 1, -1, -1):
        decided[t] = state >> top
        state = prev[state, choice[t, state]]
    return decided[:msg_len]


@dataclass(frozen=True)
class Interleaver:
    length: int
    seed: int = 0
    permutation: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("length must be >= 1")
        perm = np.random.default_rng(self.seed).permutation(self.length)
        object.__setattr__(self, "permutation", perm)

    @classmethod
    def identity(cls, length: int) -> "Interleaver":
        il = cls(length)
        object.__setattr__(il, "permutation", np.arange(length))
        return il


def interleave(x, il: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != il.length:
        raise ValueError("length mismatch")
    return x[il.permutation]


def deinterleave(x, il: Interleaver) -> np.ndarray:
    x = np.asarray(x)
    if x.shape[0] != il.length:
        raise ValueError("length mismatch")
    out = np.empty_like(x)
    out[il.permutation] = x
    return out
