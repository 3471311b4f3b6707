"""Run every built-in case study and the table sweep into one output tree.

    python scripts/run_case_studies.py --out results [--plots]
"""
import argparse
import sys
from pathlib import Path

from diw_mrac import cli

JOBS = [
    ("run", "1"),
    ("run", "2"),
    ("compare", "3a"),
    ("compare", "3b"),
    ("sweep", "table1-sweep"),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--plots", action="store_true")
    ap.add_argument("--seed", type=int, default=None)
    args = ap.parse_args(argv)

    worst = 0
    for command, preset in JOBS:
        target = args.out / f"{command}_{preset}"
        extra = (["--plots"] if args.plots else []) + (["--seed", str(args.seed)] if args.seed is not None else [])
        code = cli.main([command, preset, "--out", str(target)] + extra)
        print(f"{command:8s} {preset:13s} -> {target}  (exit {code})")
        worst = max(worst, code)
    print((args.out / "sweep_table1-sweep" / "table.txt").read_text())
    return worst


if __name__ == "__main__":
    sys.exit(main())
