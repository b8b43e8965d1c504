"""Frame-level simulation and deterministic Monte Carlo sweeps."""

from __future__ import annotations

import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.stats import norm

from ..channel import (
    ChannelRealization, add_awgn, apply_channel_time, ctf_grid, effective_dd_matrix,
    impulse_response, noise_variance, onetap_interference, sample_channel, sparse_dd_operator,
)
from ..coding import STANDARD_CODE, Interleaver, conv_encode, deinterleave, interleave, viterbi_decode
from ..detection import (
    Constellation, DetectionResult, detect_cdid, detect_lmmse, detect_map, detect_mpa,
    detect_ofdm_onetap, sparsify,
)
from ..estimation import ddce_refine, estimate_dd, estimate_tf, nmse, tf_estimate_dense, tf_pilot_lattice
from ..params import spectral_efficiency
from ..transforms import heisenberg_modulate, otfs_demodulate, otfs_modulate, papr_db, unvec, vec, wigner_demodulate
from .config import SimConfig, tf_pilot_steps

BATCH = 64  # frames evaluated between stop-rule checks; does not affect results
_INF_KEY = 1 << 31


@dataclass(frozen=True)
class FrameRecord:
    bits: int
    bit_errors: int
    frame_error: bool
    nmse: float = math.nan
    nmse_init: float = math.nan
    papr_db: float = math.nan
    iterations: int = 0
    converged: bool = True


@dataclass(frozen=True)
class SnrRecord:
    snr_db: float
    frames: int
    bits: int
    bit_errors: int
    ber: float
    ber_ci_lo: float
    ber_ci_hi: float
    frame_errors: int
    fer: float
    nmse: float
    nmse_init: float
    papr_p99: float
    converged_fraction: float
    seed_key: tuple[int, int, int]


@dataclass
class SimResult:
    config: SimConfig
    records: list[SnrRecord] = field(default_factory=list)
    wall_time: float = 0.0

    @property
    def label(self) -> str:
        return self.config.curve_label

    def record(self, snr_db: float) -> SnrRecord:
        for r in self.records:
            if r.snr_db == snr_db:
                return r
        raise KeyError(f"no record at {snr_db} dB")

    @property
    def spectral_efficiency(self) -> float:
        cfg = self.config
        scheme = cfg.pilot_scheme
        eta = scheme.eta if scheme is not None else 0.0
        rate = STANDARD_CODE.rate if cfg.coded else 1.0
        return spectral_efficiency(eta, rate, cfg.modulation)


# ---------------------------------------------------------------- statistics

def wilson_interval(k: int, n: int, confidence: float = 0.95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion; (nan, nan) when n = 0."""
    if n == 0:
        return math.nan, math.nan
    z = float(norm.ppf(0.5 + confidence / 2))
    p = k / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    # the bounds are exact at the edges; floating-point residue is clipped away
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return lo, hi


# ---------------------------------------------------------------- seeding

def _snr_key(snr_db: float) -> int:
    return _INF_KEY if math.isinf(snr_db) else int(round(snr_db * 1000)) % _INF_KEY

def seed_key(cfg: SimConfig, snr_db: float) -> tuple[int, int, int]:
    """Substream key shared by every curve of an experiment at one SNR."""
    return cfg.seed, zlib.crc32(cfg.name.encode()), _snr_key(snr_db)


def frame_rngs(cfg: SimConfig, snr_db: float, frame_index: int) -> dict[str, np.random.Generator]:
    """Independent generators for bits, channel, noise and auxiliary draws."""
    ss = np.random.SeedSequence([*seed_key(cfg, snr_db), frame_index])
    names = ("bits", "channel", "noise", "aux")
    return {n: np.random.default_rng(s) for n, s in zip(names, ss.spawn(len(names)))}


# ---------------------------------------------------------------- operators

def genie_operator(ch: ChannelRealization, cfg: SimConfig):
    """Sparse closed form where it is exact, otherwise the probed matrix."""
    params = ch.params
    if ch.integer_doppler and ch.l_max <= params.cp_len and cfg.window_spec.is_rectangular:
        return sparse_dd_operator(ch)
    return effective_dd_matrix(ch, cfg.window_spec)


def _dense(H) -> np.ndarray:
    return H.toarray() if sp.issparse(H) else np.asarray(H)


def run_detector(cfg: SimConfig, y, H, noise_var: float, C: Constellation) -> DetectionResult:
    det = cfg.detector_config
    if det.variant == "lmmse":
        return detect_lmmse(y, _dense(H), noise_var, C)
    if det.variant == "map":
        return detect_map(y, _dense(H), noise_var, C)
    if det.variant == "mpa":
        Hs = H if sp.issparse(H) else sparsify(H)
        return detect_mpa(y, Hs, noise_var, C, det.max_iters, det.damping, det.tol)
    raise ValueError(f"detector {det.variant!r} does not take a DD operator")


# ---------------------------------------------------------------- frames

def _data_layout(cfg: SimConfig) -> np.ndarray:
    """Vec-order indices of the data cells."""
    scheme = cfg.pilot_scheme
    if scheme is None:
        return np.arange(cfg.M * cfg.N)
    return np.flatnonzero(vec(scheme.data_mask))


def _place(values, idx, M: int, N: int) -> np.ndarray:
    v = np.zeros(M * N, dtype=complex)
    v[idx] = values
    return unvec(v, M, N)


def _bits_for(cfg: SimConfig, n_symbols: int, rng: np.random.Generator):
    """Message bits and the bit stream mapped to symbols."""
    C = Constellation(cfg.modulation)
    n_bits = n_symbols * C.bits_per_symbol
    if not cfg.coded:
        msg = rng.integers(0, 2, n_bits, dtype=np.int8)
        return msg, msg, None
    k = STANDARD_CODE.message_length(n_bits)
    msg = rng.integers(0, 2, k, dtype=np.int8)
    il = Interleaver(n_bits, cfg.interleaver_seed)
    return msg, interleave(conv_encode(msg), il), il


def _decide(res: DetectionResult, il: Interleaver | None) -> np.ndarray:
    if il is None:
        return res.hard_bits.reshape(-1)
    return viterbi_decode(deinterleave(res.llrs.reshape(-1), il))


def _record(msg, decided, res: DetectionResult | None, **extra) -> FrameRecord:
    errors = int(np.count_nonzero(msg != decided))
    return FrameRecord(
        bits=int(msg.size), bit_errors=errors, frame_error=errors > 0,
        iterations=res.iterations_used if res is not None else 0,
        converged=res.converged if res is not None else True, **extra,
    )


def run_frame(cfg: SimConfig, snr_db: float, frame_index: int) -> FrameRecord:
    """Simulate one frame; a pure function of (config, SNR, frame index)."""
    try:
        if cfg.experiment == "ce":
            return _ce_frame(cfg, snr_db, frame_index)
        return _ber_frame(cfg, snr_db, frame_index)
    except Exception as exc:
        raise RuntimeError(f"{cfg.curve_label}: frame {frame_index} at {snr_db} dB failed: {exc}") from exc


def _ber_frame(cfg: SimConfig, snr_db: float, frame_index: int) -> FrameRecord:
    rng = frame_rngs(cfg, snr_db, frame_index)
    params = cfg.frame_params
    M, N = params.M, params.N
    C = Constellation(cfg.modulation)
    ch = sample_channel(cfg.channel_config, params, rng["channel"])
    s2 = noise_variance(snr_db)
    idx = _data_layout(cfg)
    msg, tx_bits, il = _bits_for(cfg, idx.size, rng["bits"])
    grid = _place(C.modulate(tx_bits), idx, M, N)

    if cfg.waveform == "ofdm":
        s = heisenberg_modulate(grid, params)
        r = add_awgn(apply_channel_time(s, ch), snr_db, rng["noise"])
        res = detect_ofdm_onetap(wigner_demodulate(r, params), ctf_grid(ch), s2, C,
                                 interference_var=onetap_interference(ch))
        return _record(msg, _decide(res, il), res, papr_db=papr_db(s))

    scheme = cfg.pilot_scheme
    frame = grid if scheme is None else grid + scheme.pilot_grid()
    s = otfs_modulate(frame, params, cfg.window_spec)
    r = add_awgn(apply_channel_time(s, ch), snr_db, rng["noise"])
    if cfg.detector == "cdid":
        res = detect_cdid(r, ch, s2, C, max_iters=cfg.cdid_iters, tol=cfg.tol)
        return _record(msg, _decide(res, il), res, papr_db=papr_db(s))

    Y = otfs_demodulate(r, params, cfg.window_spec)
    y = vec(Y)
    extra = {"papr_db": papr_db(s)}
    if cfg.csi == "genie":
        H = genie_operator(ch, cfg)
    else:
        est = estimate_dd(Y, scheme, cfg.threshold_factor, cfg.window_spec,
                          noise_var=s2 if cfg.noise_estimate == "known" else None)
        extra["nmse"] = nmse(est, ch)
        full = est.operator()
        y = y - full @ vec(scheme.pilot_grid())
        H = full[:, idx]
    res = run_detector(cfg, y, H, s2, C)
    return _record(msg, _decide(res, il), res, **extra)


def _ce_frame(cfg: SimConfig, snr_db: float, frame_index: int) -> FrameRecord:
    rng = frame_rngs(cfg, snr_db, frame_index)
    params = cfg.frame_params
    M, N = params.M, params.N
    C = Constellation(cfg.modulation)
    ch = sample_channel(cfg.channel_config, params, rng["channel"])
    s2 = noise_variance(snr_db)
    ref = (M // 2, N // 2)

    if cfg.estimator == "tf":
        sm, sn = tf_pilot_steps(cfg)
        mask = tf_pilot_lattice(params, sm, sn)
        data_idx = np.flatnonzero(vec(~mask))
        msg, tx_bits, _ = _bits_for(cfg.__class__(**{**cfg.__dict__, "coded": False}), data_idx.size,
                                    rng["bits"])
        # total pilot energy equals the single DD pilot's energy
        amp = math.sqrt(M * N / np.count_nonzero(mask)) * 10 ** (cfg.pilot_boost_db / 20)
        X = _place(C.modulate(tx_bits), data_idx, M, N) + amp * mask
        s = heisenberg_modulate(X, params)
        r = add_awgn(apply_channel_time(s, ch), snr_db, rng["noise"])
        H_hat = estimate_tf(wigner_demodulate(r, params), mask, amp * mask)
        h = impulse_response(ch, ref=ref)
        err = np.sum(np.abs(tf_estimate_dense(H_hat, params, ref) - h) ** 2) / np.sum(np.abs(h) ** 2)
        return FrameRecord(0, 0, False, nmse=float(err), papr_db=papr_db(s))

    scheme = cfg.pilot_scheme
    idx = np.flatnonzero(vec(scheme.data_mask))
    msg, tx_bits, il = _bits_for(cfg, idx.size, rng["bits"])
    frame = _place(C.modulate(tx_bits), idx, M, N) + scheme.pilot_grid()
    s = otfs_modulate(frame, params, cfg.window_spec)
    r = add_awgn(apply_channel_time(s, ch), snr_db, rng["noise"])
    Y = otfs_demodulate(r, params, cfg.window_spec)
    est = estimate_dd(Y, scheme, cfg.threshold_factor, cfg.window_spec,
                      noise_var=s2 if cfg.noise_estimate == "known" else None)
    first = nmse(est, ch)
    if cfg.detector == "none":
        return FrameRecord(0, 0, False, nmse=first, nmse_init=first, papr_db=papr_db(s))

    y = vec(Y)
    pilot = vec(scheme.pilot_grid())

    def detect(e):
        full = e.operator()
        return run_detector(cfg, y - full @ pilot, full[:, idx], s2, C)

    rounds = cfg.ddce_iters if cfg.estimator == "ddce" else 0
    res = detect(est)
    for _ in range(rounds):
        soft = None
        if cfg.ddce_soft:
            post = res.posteriors
            mean = post @ C.points
            var = np.maximum(post @ np.abs(C.points) ** 2 - np.abs(mean) ** 2, 0.0)
            soft = (_place(mean, idx, M, N), np.real(_place(var, idx, M, N)))
        detected = _place(res.hard_symbols, idx, M, N)
        rel = np.real(_place(res.reliabilities, idx, M, N))
        est = ddce_refine(Y, detected, rel, est, scheme, cfg.reliability_threshold, noise_var=s2,
                          soft=soft, threshold_factor=cfg.threshold_factor)
        res = detect(est)
    return _record(msg, _decide(res, il), res, nmse=nmse(est, ch), nmse_init=first, papr_db=papr_db(s))


# ---------------------------------------------------------------- sweeps

def _frame_task(args):
    cfg, snr_db, start, stop = args
    return [run_frame(cfg, snr_db, i) for i in range(start, stop)]


def stop_index(records: list[FrameRecord], cfg: SimConfig) -> int | None:
    """Smallest frame count meeting the stop rule, or None if not yet met."""
    errors = 0
    for i, rec in enumerate(records, 1):
        errors += rec.frame_error
        if errors >= cfg.min_frame_errors or i >= cfg.max_frames:
            return i
    return None


def aggregate(cfg: SimConfig, snr_db: float, records: list[FrameRecord]) -> SnrRecord:
    """Fold per-frame records (in frame order) into one SNR point."""
    frames = len(records)
    bits = sum(r.bits for r in records)
    errors = sum(r.bit_errors for r in records)
    ferr = sum(r.frame_error for r in records)
    lo, hi = wilson_interval(errors, bits)
    ber = errors / bits if bits else math.nan

    def mean_of(attr):
        vals = [getattr(r, attr) for r in records]
        vals = [v for v in vals if not math.isnan(v)]
        return math.fsum(vals) / len(vals) if vals else math.nan

    paprs = np.array([r.papr_db for r in records if not math.isnan(r.papr_db)])
    p99 = float(np.percentile(paprs, 99)) if paprs.size else math.nan
    return SnrRecord(
        snr_db=snr_db, frames=frames, bits=bits, bit_errors=errors, ber=ber,
        ber_ci_lo=lo, ber_ci_hi=hi, frame_errors=ferr,
        fer=ferr / frames if frames and bits else math.nan,
        nmse=mean_of("nmse"), nmse_init=mean_of("nmse_init"), papr_p99=p99,
        converged_fraction=sum(r.converged for r in records) / frames if frames else math.nan,
        seed_key=seed_key(cfg, snr_db),
    )


def run_snr_point(cfg: SimConfig, snr_db: float, pool: ProcessPoolExecutor | None = None,
                  workers: int = 1) -> tuple[SnrRecord, list[FrameRecord]]:
    """Frames at one SNR until the stop rule holds; exact regardless of batching."""
    records: list[FrameRecord] = []
    while True:
        start = len(records)
        stop = min(start + BATCH * max(workers, 1), cfg.max_frames)
        if pool is None:
            records.extend(_frame_task((cfg, snr_db, start, stop)))
        else:
            bounds = np.linspace(start, stop, workers + 1).astype(int)
            tasks = [(cfg, snr_db, a, b) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
            for chunk in pool.map(_frame_task, tasks):
                records.extend(chunk)
        n = stop_index(records, cfg)
        if n is not None:
            records = records[:n]
            return aggregate(cfg, snr_db, records), records


def run_sweep(cfg: SimConfig, workers: int = 1, pool: ProcessPoolExecutor | None = None) -> SimResult:
    """All SNR points of one curve. Identical output for any worker count."""
    t0 = time.perf_counter()
    own = pool is None and workers > 1
    if own:
        pool = ProcessPoolExecutor(max_workers=workers)
    try:
        recs = [run_snr_point(cfg, snr, pool, workers)[0] for snr in cfg.snr_db]
    finally:
        if own:
            pool.shutdown()
    return SimResult(cfg, recs, time.perf_counter() - t0)


def run_experiment(configs: list[SimConfig], workers: int = 1) -> list[SimResult]:
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        return [run_sweep(c, workers, pool) for c in configs]
    finally:
        if pool is not None:
            pool.shutdown()
