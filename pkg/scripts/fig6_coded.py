#!/usr/bin/env python3
"""Coded vs uncoded OTFS and OFDM for one and four paths.

Extra arguments are forwarded to `otfs-lab run`, e.g. `--workers 4` or
`--override max_frames=500`.
"""

import sys

from otfs_lab.harness.cli import main

PRESETS = ["fig6_coded"]

if __name__ == "__main__":
    code = 0
    for preset in PRESETS:
        code = max(code, main(["run", preset, "--out", f"out/{preset}", *sys.argv[1:]]))
    sys.exit(code)
