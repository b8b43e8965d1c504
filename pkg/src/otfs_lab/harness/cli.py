"""``otfs-lab`` command line: run, info, presets."""

from __future__ import annotations

import argparse
import math
import sys

from ..params import SPEED_OF_LIGHT, coherence_time, compactness_check, spectral_efficiency
from .config import SimConfig, expand, load_config, preset_names, preset_text
from .output import emit_all, fmt
from .sim import run_experiment


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _configs(args) -> tuple[list[SimConfig], str]:
    overrides = list(args.override or [])
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    cfg_file = load_config(args.config, overrides)
    return expand(cfg_file), cfg_file.source


def cmd_run(args) -> int:
    configs, source = _configs(args)
    out = args.out or f"out/{configs[0].name}"
    results = run_experiment(configs, workers=args.workers)
    for res in results:
        for r in res.records:
            print(f"{res.label:>28s}  {fmt(r.snr_db):>6s} dB  frames={r.frames:<7d} "
                  f"ber={r.ber:.3e}  nmse={r.nmse:.3e}")
    for p in emit_all(results, out, source, args.workers, configs[0].name):
        print(f"wrote {p}")
    return 0


def info_lines(cfg: SimConfig) -> list[str]:
    p = cfg.frame_params
    tau_max = cfg.l_max * p.delay_resolution
    nu_max = cfg.kappa_max * p.doppler_resolution
    speed = nu_max * SPEED_OF_LIGHT / p.fc
    scheme = cfg.pilot_scheme
    eta = scheme.eta if scheme is not None else 0.0
    rate = 0.5 if cfg.coded else 1.0
    rows = [
        ("grid M x N", f"{p.M} x {p.N}"),
        ("subcarrier spacing [Hz]", fmt(p.delta_f)),
        ("slot duration T [s]", fmt(p.T)),
        ("cp_len [samples]", str(p.cp_len)),
        ("sample rate [Hz]", fmt(p.sample_rate)),
        ("bandwidth M*df [Hz]", fmt(p.bandwidth)),
        ("frame duration [s]", fmt(p.frame_duration)),
        ("delay resolution [s]", fmt(p.delay_resolution)),
        ("Doppler resolution [Hz]", fmt(p.doppler_resolution)),
        ("tau_max [s]", fmt(tau_max)),
        ("nu_max [Hz]", fmt(nu_max)),
        ("implied speed at fc [km/h]", fmt(speed * 3.6)),
        ("coherence time [s]", fmt(coherence_time(nu_max)) if nu_max > 0 else "inf"),
        ("4 tau_max nu_max", fmt(compactness_check(tau_max, nu_max).product)),
        ("pilot overhead eta", fmt(eta)),
        ("spectral efficiency [b/s/Hz]", fmt(spectral_efficiency(eta, rate, cfg.modulation))),
    ]
    return [f"  {k:<30s} {v}" for k, v in rows]


def cmd_info(args) -> int:
    configs, source = _configs(args)
    print(f"# {source}")
    for cfg in configs:
        snrs = ", ".join(fmt(s) for s in cfg.snr_db)
        print(f"[{cfg.curve_label}] experiment={cfg.experiment} detector={cfg.detector} "
              f"waveform={cfg.waveform} snr_db=[{snrs}]")
        print("\n".join(info_lines(cfg)))
    return 0


def cmd_presets(args) -> int:
    for name in preset_names():
        first = next((ln.lstrip("# ").strip() for ln in preset_text(name).splitlines() if ln.startswith("#")), "")
        print(f"{name:<22s} {first}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="otfs-lab", description="OTFS link-level Monte Carlo laboratory")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", help="config file path or preset name")
    run.add_argument("--out", help="output directory (default out/<name>)")
    run.add_argument("--seed", type=_u64, help="master seed override")
    run.add_argument("--workers", type=int, default=1, help="worker processes")
    run.add_argument("--override", action="append", metavar="KEY=VALUE", help="override a config key")
    run.set_defaults(func=cmd_run)
    info = sub.add_parser("info", help="print the derived link-budget table")
    info.add_argument("config")
    info.add_argument("--override", action="append", metavar="KEY=VALUE")
    info.set_defaults(func=cmd_info)
    pre = sub.add_parser("presets", help="list shipped presets")
    pre.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("otfs-lab: --workers must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, OSError) as exc:
        print(f"otfs-lab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
