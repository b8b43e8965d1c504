#!/usr/bin/env python3
"""PAPR of random QPSK frames: OTFS vs OFDM on the same M x N grid.

Prints medians with distribution-free 95% intervals and writes a CCDF plot.
"""

import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from scipy.stats import binom

from otfs_lab.detection import QPSK
from otfs_lab.params import OtfsFrameParams
from otfs_lab.transforms import heisenberg_modulate, otfs_modulate, papr_db


def papr_samples(params: OtfsFrameParams, frames: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    otfs, ofdm = np.empty(frames), np.empty(frames)
    for i in range(frames):
        X = QPSK.points[rng.integers(0, 4, (params.M, params.N))]
        otfs[i] = papr_db(otfs_modulate(X, params))
        ofdm[i] = papr_db(heisenberg_modulate(X, params))
    return otfs, ofdm


def median_interval(x: np.ndarray, confidence: float = 0.95) -> tuple[float, float]:
    """Order-statistic interval for the median (binomial, distribution-free)."""
    xs = np.sort(x)
    n = xs.size
    a = (1 - confidence) / 2
    lo = int(binom.ppf(a, n, 0.5))
    hi = int(binom.isf(a, n, 0.5))
    return float(xs[max(lo - 1, 0)]), float(xs[min(hi, n - 1)])


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--M", type=int, default=16)
    ap.add_argument("--N", type=int, default=8)
    ap.add_argument("--frames", type=int, default=10_000)
    ap.add_argument("--seed", type=int, default=8)
    ap.add_argument("--out", default="out/papr_ccdf.svg")
    args = ap.parse_args()
    params = OtfsFrameParams(args.M, args.N, cp_len=0)
    otfs, ofdm = papr_samples(params, args.frames, args.seed)
    for name, x in (("OTFS", otfs), ("OFDM", ofdm)):
        lo, hi = median_interval(x)
        print(f"{name}: median {np.median(x):.3f} dB  95% CI [{lo:.3f}, {hi:.3f}]  p99 {np.percentile(x, 99):.3f} dB")
    fig, ax = plt.subplots()
    for name, x in (("OTFS", otfs), ("OFDM", ofdm)):
        xs = np.sort(x)
        ax.semilogy(xs, 1 - np.arange(xs.size) / xs.size, label=name)
    ax.set_xlabel("PAPR [dB]")
    ax.set_ylabel("P(PAPR > x)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(args.out, format="svg", metadata={"Date": None})
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
