"""Localization error and coverage as the range error bound grows.

Usage: python scripts/sweep_error.py --out results/error [--trials N] [--workers K]
"""

import argparse

from flipfree.harness import run_sweep
from flipfree.netmodel import ScenarioConfig

BASE = ScenarioConfig(n=100, r=30, trials=50)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/error")
    ap.add_argument("--trials", type=int, default=BASE.trials)
    ap.add_argument("--seed", type=int, default=BASE.seed)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()
    base = BASE.replace(trials=args.trials, seed=args.seed)
    reports = run_sweep("error", base, args.out, workers=args.workers)
    for value, rep in reports.items():
        for algo, agg in rep.aggregates.items():
            err = agg["avg_err"]["mean"]
            print(f"error={value!s:8s} {algo:6s} localized {agg['pct_localized']['mean']:6.2f}%  "
                  f"avg_err {'n/a' if err is None else f'{err:.3f}'}  flips {agg['flips']['mean']:.2f}")


if __name__ == "__main__":
    main()
