"""Doubly-dispersive channel: path sampling, waveform-level application,
AWGN and the effective DD-domain operator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import ResourceLimitError
from .params import OtfsFrameParams
from .transforms import RECTANGULAR, WindowSpec, otfs_demodulate, otfs_modulate, unvec, vec


class DopplerLaw(enum.Enum):
    UNIFORM_BINS = "uniform"
    JAKES_COSINE = "jakes"


@dataclass(frozen=True)
class PathSpec:
    """One propagation path: complex gain, integer delay tap, Doppler in bins."""

    gain: complex
    delay_tap: int
    doppler: float

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise ValueError("path gain must be finite")
        if int(self.delay_tap) != self.delay_tap or self.delay_tap < 0:
            raise ValueError("delay_tap must be a non-negative integer")
        if not math.isfinite(self.doppler):
            raise ValueError("doppler must be finite")

    @property
    def is_integer(self) -> bool:
        return float(self.doppler).is_integer()


@dataclass(frozen=True)
class ChannelRealization:
    paths: tuple[PathSpec, ...]
    params: OtfsFrameParams
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "paths", tuple(self.paths))
        for p in self.paths:
            if p.delay_tap > self.params.M - 1:
                raise ValueError("delay_tap exceeds the delay grid")
            if abs(p.doppler) > self.params.N:
                raise ValueError("|doppler| exceeds one Doppler period")

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay_tap for p in self.paths], dtype=int)

    @property
    def dopplers(self) -> np.ndarray:
        return np.array([p.doppler for p in self.paths], dtype=float)

    @property
    def integer_doppler(self) -> bool:
        return all(p.is_integer for p in self.paths)

    @property
    def l_max(self) -> int:
        return int(self.delays.max()) if self.paths else 0

    def to_text(self) -> str:
        p = self.params
        lines = [
            "# otfs-lab channel v1",
            f"M={p.M} N={p.N} delta_f={p.delta_f!r} fc={p.fc!r} cp_len={p.cp_len} seed={self.seed}",
            "gain_re gain_im delay_tap kappa",
        ]
        for path in self.paths:
            g = complex(path.gain)
            lines.append(f"{g.real!r} {g.imag!r} {path.delay_tap} {float(path.doppler)!r}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ChannelRealization":
        rows = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        header = dict(tok.split("=", 1) for tok in rows[0].split())
        params = OtfsFrameParams(
            int(header["M"]), int(header["N"]), float(header["delta_f"]), float(header["fc"]),
            int(header["cp_len"]),
        )
        seed = None if header.get("seed", "None") == "None" else int(header["seed"])
        paths = []
        for ln in rows[2:]:
            re_, im_, tap, kappa = ln.split()
            paths.append(PathSpec(complex(float(re_), float(im_)), int(tap), float(kappa)))
        return cls(tuple(paths), params, seed)


@dataclass(frozen=True)
class ChannelConfig:
    P: int
    l_max: int
    kappa_max: float
    fractional_doppler: bool = False
    doppler_law: DopplerLaw = DopplerLaw.UNIFORM_BINS
    power_profile: str = "uniform"
    decay_rate: float = 0.0

    def __post_init__(self):
        if self.P < 1:
            raise ValueError("P must be >= 1")
        if self.l_max < 0 or self.kappa_max < 0:
            raise ValueError("l_max and kappa_max must be >= 0")
        if self.power_profile not in ("uniform", "exponential"):
            raise ValueError(f"unknown power profile {self.power_profile!r}")

    def validate(self, params: OtfsFrameParams) -> None:
        if self.l_max > params.M - 1:
            raise ValueError("l_max must be <= M - 1")
        # kappa_max above N/2 aliases in the Doppler index; one full period is the limit.
        if self.kappa_max > params.N:
            raise ValueError("kappa_max must be <= N")
        if self.P - 1 > self.l_max:
            raise ValueError("P - 1 distinct non-zero delays do not fit in [1, l_max]")


def sample_channel(cfg: ChannelConfig, params: OtfsFrameParams, rng: np.random.Generator,
                   seed: int | None = None) -> ChannelRealization:
    """Draw one realization: first path at delay 0, the rest at distinct delays in [1, l_max]."""
    cfg.validate(params)
    P = cfg.P
    delays = np.concatenate([[0], rng.choice(np.arange(1, cfg.l_max + 1), size=P - 1, replace=False)])
    if cfg.doppler_law is DopplerLaw.JAKES_COSINE:
        kappa = cfg.kappa_max * np.cos(rng.uniform(0, 2 * np.pi, size=P))
    else:
        kappa = rng.uniform(-cfg.kappa_max, cfg.kappa_max, size=P)
    if not cfg.fractional_doppler:
        kappa = np.rint(kappa)
    kappa = kappa + 0.0  # no negative zeros in fixtures
    if cfg.power_profile == "exponential":
        power = np.exp(-cfg.decay_rate * delays)
    else:
        power = np.ones(P)
    power = power / power.sum()
    gains = np.sqrt(power / 2) * (rng.standard_normal(P) + 1j * rng.standard_normal(P))
    paths = tuple(PathSpec(complex(g), int(d), float(k)) for g, d, k in zip(gains, delays, kappa))
    return ChannelRealization(paths, params, seed)


def _doppler_step(params: OtfsFrameParams) -> float:
    """Phase advance in cycles per sample for one Doppler bin."""
    return 1.0 / (params.N * (params.M + params.cp_len))


def apply_channel_time(ts, ch: ChannelRealization) -> np.ndarray:
    """r[n] = sum_i g_i exp(j2pi nu_i Ts (n - l_i)) s[n - l_i], s zero before the frame."""
    s = np.asarray(ts)
    params = ch.params
    if s.shape[-1] != params.samples_per_frame:
        raise ValueError("signal length does not match the channel's frame parameters")
    L = s.shape[-1]
    n = np.arange(L)
    step = _doppler_step(params)
    r = np.zeros(s.shape, dtype=complex)
    for p in ch.paths:
        d = p.delay_tap
        if d >= L:
            continue
        phase = np.exp(2j * np.pi * p.doppler * step * (n[d:] - d))
        r[..., d:] += p.gain * phase * s[..., : L - d]
    return r


def noise_variance(es_n0_db: float, es: float = 1.0) -> float:
    if es_n0_db == math.inf:
        return 0.0
    return es / 10 ** (es_n0_db / 10)


def add_awgn(ts, es_n0_db: float, rng: np.random.Generator, es: float = 1.0) -> np.ndarray:
    """Add circularly-symmetric complex Gaussian noise; ``inf`` dB means noiseless."""
    s = np.asarray(ts)
    var = noise_variance(es_n0_db, es)
    if var == 0.0:
        return s.astype(complex, copy=True)
    noise = rng.standard_normal(s.shape) + 1j * rng.standard_normal(s.shape)
    return s + math.sqrt(var / 2) * noise


def dd_pipeline(dd, ch: ChannelRealization, window: WindowSpec = RECTANGULAR) -> np.ndarray:
    """Noiseless DD-in/DD-out response of the full waveform chain."""
    params = ch.params
    return otfs_demodulate(apply_channel_time(otfs_modulate(dd, params, window), ch), params, window)


def effective_dd_matrix(ch: ChannelRealization, window: WindowSpec = RECTANGULAR,
                        cap: int = 4096, chunk: int = 512) -> np.ndarray:
    """MN x MN DD operator probed column by column through :func:`dd_pipeline`.

    Column ``j`` is the response to the unit impulse at ``(j % M, j // M)``.
    """
    params = ch.params
    MN = params.size
    if MN > cap:
        raise ResourceLimitError(f"MN = {MN} exceeds the dense-operator cap {cap}")
    H = np.empty((MN, MN), dtype=complex)
    for start in range(0, MN, chunk):
        cols = np.arange(start, min(start + chunk, MN))
        probes = np.zeros((cols.size, MN), dtype=complex)
        probes[np.arange(cols.size), cols] = 1.0
        out = dd_pipeline(unvec(probes, params.M, params.N), ch, window)
        H[:, cols] = vec(out).T
    return H


def shift_operator(params: OtfsFrameParams, taps) -> sp.csr_matrix:
    """Sparse DD operator of integer-grid taps ``(gain, delay_offset, doppler_offset)``.

    Input (l, k) maps to ((l + d) mod M, (k + kappa) mod N) with gain
    g exp(j2pi kappa (cp + l' - d) / (N (M + cp))), where l' is the output
    delay bin. Offsets may be negative (virtual taps of an estimate).
    """
    M, N, cp = params.M, params.N, params.cp_len
    l, k = np.meshgrid(np.arange(M), np.arange(N), indexing="ij")
    l, k = l.ravel(order="F"), k.ravel(order="F")
    cols = l + M * k
    rows, vals, cidx = [], [], []
    step = _doppler_step(params)
    for gain, d, kap in taps:
        l_out = (l + d) % M
        k_out = (k + kap) % N
        rows.append(l_out + M * k_out)
        vals.append(gain * np.exp(2j * np.pi * kap * step * (cp + l_out - d)))
        cidx.append(cols)
    MN = M * N
    if not rows:
        return sp.csr_matrix((MN, MN), dtype=complex)
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cidx))), shape=(MN, MN)
    )


def sparse_dd_operator(ch: ChannelRealization) -> sp.csr_matrix:
    """Closed-form DD operator for integer Doppler, CP >= max delay and no window.

    Each path is a circular shift by (delay, Doppler) with a within-slot phase;
    see :func:`shift_operator`.
    """
    if not ch.integer_doppler:
        raise ValueError("closed-form operator needs integer Doppler")
    if ch.l_max > ch.params.cp_len:
        raise ValueError("closed-form operator needs cp_len >= max delay")
    return shift_operator(ch.params, [(p.gain, p.delay_tap, int(round(p.doppler))) for p in ch.paths])


def time_domain_matrix(ch: ChannelRealization) -> sp.csr_matrix:
    """Sparse MN x MN map from transmitted to received payload samples (CPs removed).

    Payload index is ``t + M * n`` for sample t of slot n. Delays longer than
    the CP reach into the previous slot, which keeps the matrix banded.
    """
    params = ch.params
    M, N, cp = params.M, params.N, params.cp_len
    slot = M + cp
    n_idx, t_idx = np.divmod(np.arange(M * N), M)
    g_rx = n_idx * slot + cp + t_idx
    rows, cols, vals = [], [], []
    step = _doppler_step(params)
    for p in ch.paths:
        src = g_rx - p.delay_tap
        ok = src >= 0
        src_slot, q = np.divmod(src[ok], slot)
        pos = np.where(q >= cp, q - cp, M - cp + q)
        rows.append(np.arange(M * N)[ok])
        cols.append(src_slot * M + pos)
        vals.append(p.gain * np.exp(2j * np.pi * p.doppler * step * src[ok]))
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(M * N, M * N)
    )


def effective_tf_matrix(ch: ChannelRealization) -> np.ndarray:
    """MN x MN CP-OFDM operator from transmitted to received TF cells, in vec order.

    Equals (I_N kron F_M) T (I_N kron F_M^H) with T from :func:`time_domain_matrix`.
    """
    params = ch.params
    F = np.fft.fft(np.eye(params.M), norm="ortho")
    B = np.kron(np.eye(params.N), F)
    return B @ (time_domain_matrix(ch) @ B.conj().T)


def onetap_interference(ch: ChannelRealization) -> np.ndarray:
    """Per-cell power left unexplained by the one-tap model y = ctf * x, as an M x N grid.

    Sums the inter-carrier leakage and the gap between the true diagonal
    and the midpoint CTF, assuming unit-energy independent symbols.
    """
    params = ch.params
    H = effective_tf_matrix(ch)
    diag = np.diag(H)
    leak = np.sum(np.abs(H) ** 2, axis=1) - np.abs(diag) ** 2
    mismatch = np.abs(diag - vec(ctf_grid(ch))) ** 2
    return unvec(np.maximum(leak, 0.0) + mismatch, params.M, params.N)


def dd_to_time_matrix(params: OtfsFrameParams) -> np.ndarray:
    """Unitary U with payload = U @ vec(dd), i.e. F_N^H kron I_M."""
    F = np.fft.fft(np.eye(params.N), norm="ortho")
    return np.kron(F.conj().T, np.eye(params.M))


def ctf_grid(ch: ChannelRealization) -> np.ndarray:
    """H[m, n] = sum_i g_i exp(j2pi nu_i (t_n - tau_i)) exp(-j2pi f_m tau_i).

    t_n is the centre of slot n's payload; the delay term in the Doppler phase
    follows the phase anchor used by :func:`apply_channel_time`.
    """
    params = ch.params
    M, N, cp = params.M, params.N, params.cp_len
    m = np.arange(M)[:, None]
    n = np.arange(N)[None, :]
    t_mid = n * (M + cp) + cp + (M - 1) / 2
    step = _doppler_step(params)
    H = np.zeros((M, N), dtype=complex)
    for p in ch.paths:
        H += p.gain * np.exp(2j * np.pi * p.doppler * step * (t_mid - p.delay_tap)) \
            * np.exp(-2j * np.pi * m * p.delay_tap / M)
    return H


def impulse_response(ch: ChannelRealization, window: WindowSpec = RECTANGULAR,
                     ref: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Dense M x N DD response to an impulse at ``ref``, re-indexed so ``ref`` sits at (0, 0)."""
    params = ch.params
    dd = np.zeros((params.M, params.N), dtype=complex)
    dd[ref] = 1.0
    out = dd_pipeline(dd, ch, window)
    return np.roll(out, (-ref[0], -ref[1]), axis=(0, 1))


def band_mask(params: OtfsFrameParams, l_max: int, kappa_max: int) -> np.ndarray:
    """Offsets (l, k) with 0 <= l <= l_max and circular |k| <= kappa_max."""
    l = np.arange(params.M)[:, None]
    k = np.arange(params.N)[None, :]
    k_sym = np.where(k <= params.N // 2, k, k - params.N)
    return (l <= l_max) & (np.abs(k_sym) <= kappa_max)
