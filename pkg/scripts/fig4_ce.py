#!/usr/bin/env python3
"""Channel-estimation NMSE: DD pilot (rect / Dolph-Chebyshev), TF lattice, single pilot, DDCE.

Extra arguments are forwarded to `otfs-lab run`, e.g. `--workers 4` or
`--override max_frames=500`.
"""

import sys

from otfs_lab.harness.cli import main

PRESETS = ["fig4_ce"]

if __name__ == "__main__":
    code = 0
    for preset in PRESETS:
        code = max(code, main(["run", preset, "--out", f"out/{preset}", *sys.argv[1:]]))
    sys.exit(code)
