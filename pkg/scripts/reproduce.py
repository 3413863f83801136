"""Run the full set of reference experiments through the CLI.

Each command writes into its own subdirectory of --out. With default settings
the whole set takes roughly 15 minutes on a single core.

    python scripts/reproduce.py --out results [--seed 0] [--config run.toml]
"""

import argparse
import sys
from pathlib import Path

from spinwalk.cli import main as cli

STEPS = [
    ("calibrate", []),
    ("devices-mc", []),
    ("solve-1d", ["--backend", "software"]),
    ("solve-1d", ["--backend", "hw-p"]),
    ("solve-1d", ["--backend", "hw-pv"]),
    ("solve-2d", ["--backend", "software"]),
    ("solve-2d", ["--backend", "hw-p"]),
    ("solve-2d", ["--backend", "hw-pv"]),
    ("sweep", []),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", default="0")
    ap.add_argument("--config")
    args = ap.parse_args()

    codes = {}
    for cmd, extra in STEPS:
        tag = cmd + ("-" + extra[-1] if extra else "")
        argv = [cmd, "--seed", args.seed, "--out", str(Path(args.out) / tag), *extra]
        if args.config:
            argv += ["--config", args.config]
        print(f"== spinwalk {' '.join(argv)}", flush=True)
        codes[tag] = cli(argv)
    for tag, code in codes.items():
        print(f"{tag:20s} exit {code}")
    return max(codes.values())


if __name__ == "__main__":
    sys.exit(main())
