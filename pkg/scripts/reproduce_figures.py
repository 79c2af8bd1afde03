"""Run the canned desk-scale sweeps and print their summaries.

    python3 scripts/reproduce_figures.py fig1-left fig1-right fig2 --out runs
"""

import argparse
import json
from pathlib import Path

from sdenet.cli import reproduce


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("figures", nargs="+", choices=("fig1-left", "fig1-right", "fig2"))
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--trials", type=int, default=256)
    ap.add_argument("--threads", type=int, default=None)
    args = ap.parse_args()
    for name in args.figures:
        summary = reproduce(name, seed=args.seed, out=Path(args.out) / name, threads=args.threads, trials=args.trials)
        print(json.dumps(summary, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
