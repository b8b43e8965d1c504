"""CSV, SVG and manifest writers."""

from __future__ import annotations

import csv
import math
import platform
import re
from pathlib import Path

import numpy as np

from .sim import SimResult, SnrRecord

CSV_HEADER = ("snr_db", "frames", "bit_errors", "ber", "ber_ci_lo", "ber_ci_hi", "fer", "nmse", "papr_p99")


def fmt(x) -> str:
    """Integers verbatim, floats with 17 significant digits (exact round trip)."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def csv_rows(result: SimResult) -> list[list[str]]:
    return [[fmt(getattr(r, k)) for k in CSV_HEADER] for r in result.records]


def _io_guard(path: Path, action):
    try:
        return action()
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def emit_csv(result: SimResult, path) -> Path:
    path = Path(path)

    def write():
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_HEADER)
            w.writerows(csv_rows(result))
    _io_guard(path, write)
    return path


def read_csv(path) -> list[dict[str, float]]:
    path = Path(path)

    def read():
        with path.open(newline="") as fh:
            reader = csv.DictReader(fh)
            if tuple(reader.fieldnames or ()) != CSV_HEADER:
                raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
            return [{k: float(v) for k, v in row.items()} for row in reader]
    return _io_guard(path, read)


def safe_name(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]+", "_", label).strip("_") or "curve"


def emit_plot(results: list[SimResult], path, title: str | None = None) -> Path:
    """One SVG with a curve per result; BER (or NMSE for estimation runs) on a log axis."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    path = Path(path)
    metric = "nmse" if results and all(r.config.experiment == "ce" for r in results) else "ber"
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    for res in results:
        pts = [(r.snr_db, getattr(r, metric)) for r in res.records
               if math.isfinite(r.snr_db) and getattr(r, metric) > 0]
        if not pts:
            continue
        xs, ys = zip(*pts)
        ax.plot(xs, ys, marker="o", label=res.label)
    ax.set_yscale("log")
    ax.set_xlabel("SNR (Es/N0) [dB]")
    ax.set_ylabel("NMSE" if metric == "nmse" else "BER")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize="small")
    fig.tight_layout()
    # fixed metadata keeps the SVG stable across runs
    _io_guard(path, lambda: fig.savefig(path, format="svg", metadata={"Date": None}))
    plt.close(fig)
    return path


def manifest_text(results: list[SimResult], source: str, workers: int) -> str:
    import numpy
    import scipy

    lines = [
        "# otfs-lab run manifest",
        f"source = {source}",
        f"workers = {workers}",
        f"python = {platform.python_version()}",
        f"numpy = {numpy.__version__}",
        f"scipy = {scipy.__version__}",
        "frame_seed = SeedSequence([seed, crc32(name), round(1000 * snr_db), frame_index])",
        "",
    ]
    for res in results:
        cfg = res.config
        lines.append(f"[curve {res.label}]")
        lines += [f"{k} = {v}" for k, v in cfg.to_items()]
        scheme = cfg.pilot_scheme
        if scheme is not None:
            lines.append(f"pilot_eta = {fmt(scheme.eta)}")
        lines.append(f"spectral_efficiency = {fmt(res.spectral_efficiency)}")
        lines.append(f"wall_time_s = {res.wall_time:.3f}")
        for r in res.records:
            lines.append(f"seed_key[{fmt(r.snr_db)}] = {r.seed_key} frames={r.frames} "
                         f"converged={fmt(r.converged_fraction)}")
        lines.append("")
    return "\n".join(lines)


def emit_manifest(results: list[SimResult], path, source: str, workers: int) -> Path:
    path = Path(path)
    _io_guard(path, lambda: path.write_text(manifest_text(results, source, workers)))
    return path


def emit_all(results: list[SimResult], out_dir, source: str, workers: int, name: str) -> list[Path]:
    out = Path(out_dir)
    _io_guard(out, lambda: out.mkdir(parents=True, exist_ok=True))
    paths = [emit_csv(r, out / f"{safe_name(r.label)}.csv") for r in results]
    paths.append(emit_plot(results, out / f"{safe_name(name)}.svg", title=name))
    paths.append(emit_manifest(results, out / "manifest.txt", source, workers))
    return paths


__all__ = ["CSV_HEADER", "SnrRecord", "emit_all", "emit_csv", "emit_manifest", "emit_plot", "fmt",
           "manifest_text", "read_csv", "safe_name"]
