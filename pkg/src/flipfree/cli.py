"""Command line entry point: ``flipfree run`` and ``flipfree sweep``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .harness import ALGORITHMS, SWEEP_AXES, load_config, run_experiment, run_sweep
from .netmodel import TRIANGLE_MODES, make_instance


def _algos(values):
    out = []
    for v in values or ["afala"]:
        out.extend(a.strip() for a in v.split(",") if a.strip())
    bad = [a for a in out if a not in ALGORITHMS]
    if bad:
        raise SystemExit(f"unknown algorithm(s): {', '.join(bad)}")
    return list(dict.fromkeys(out))


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON scenario config; keys are ScenarioConfig fields")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--algo", action="append", help="afala, tla or bilat; repeat or comma-separate")
    p.add_argument("--seed", type=int, help="master seed (overrides config)")
    p.add_argument("--grid-res", type=float, help="lattice spacing h (overrides config)")
    p.add_argument("--triangle", choices=TRIANGLE_MODES, help="seed triangle mode (overrides config)")
    p.add_argument("--trials", type=int, help="number of trials (overrides config)")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--trace", action="store_true", help="also write trace.jsonl")
    p.add_argument("--no-timing", action="store_true", help="write runtime_ms as 0 for byte-stable reports")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flipfree", description="Flip-free range-based localization simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run paired trials for one scenario")
    _common(run)
    run.add_argument("--export-instance", action="store_true", help="dump trial-0 instance as instance.json")

    sweep = sub.add_parser("sweep", help="run one evaluation axis")
    sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    _common(sweep)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config, seed=args.seed, grid_res=args.grid_res, triangle_mode=args.triangle, trials=args.trials)
    algos = _algos(args.algo)
    if args.command == "sweep" and not args.algo:
        algos = list(ALGORITHMS)
    timing = not args.no_timing
    out = Path(args.out)

    if args.command == "run":
        rep = run_experiment(cfg, algos, workers=args.workers, timing=timing, trace=args.trace)
        rep.write(out)
        if args.export_instance:
            from .harness import trial_streams

            inst = make_instance(cfg, trial_streams(cfg.seed, 0)[0])
            (out / "instance.json").write_text(json.dumps(inst.to_dict()) + "\n")
        for algo, agg in rep.aggregates.items():
            err = agg["avg_err"]["mean"]
            print(f"{algo:6s} localized {agg['pct_localized']['mean']:6.2f}%  "
                  f"avg_err {'n/a' if err is None else f'{err:.4f}'}  flips {agg['flips']['mean']:.2f}")
    else:
        run_sweep(args.axis, cfg, out, algos, workers=args.workers, timing=timing, trace=args.trace)
        print(f"wrote {out / f'sweep_{args.axis}.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
