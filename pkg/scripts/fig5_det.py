#!/usr/bin/env python3
"""Detector comparison: OFDM one-tap, LMMSE, MPA and CDID at two speeds, plus the tiny MAP variant.

Extra arguments are forwarded to `otfs-lab run`, e.g. `--workers 4` or
`--override max_frames=500`.
"""

import sys

from otfs_lab.harness.cli import main

PRESETS = ["fig5_det", "fig5_map_tiny"]

if __name__ == "__main__":
    code = 0
    for preset in PRESETS:
        code = max(code, main(["run", preset, "--out", f"out/{preset}", *sys.argv[1:]]))
    sys.exit(code)
