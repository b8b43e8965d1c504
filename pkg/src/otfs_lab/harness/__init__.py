"""Monte Carlo harness: configs, frame simulation, sweeps, outputs and CLI."""

from .config import SimConfig, expand, load_config, parse_config_text, preset_names
from .output import CSV_HEADER, emit_all, emit_csv, emit_manifest, emit_plot, read_csv
from .sim import (
    FrameRecord, SimResult, SnrRecord, aggregate, frame_rngs, genie_operator, run_experiment,
    run_frame, run_snr_point, run_sweep, stop_index, wilson_interval,
)

__all__ = [
    "CSV_HEADER", "FrameRecord", "SimConfig", "SimResult", "SnrRecord", "aggregate", "emit_all",
    "emit_csv", "emit_manifest", "emit_plot", "expand", "frame_rngs", "genie_operator", "load_config",
    "parse_config_text", "preset_names", "read_csv", "run_experiment", "run_frame", "run_snr_point",
    "run_sweep", "stop_index", "wilson_interval",
]
