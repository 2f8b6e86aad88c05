"""Monte-Carlo experiments: paired trials, metrics, sweeps and report files.

Layout written by ``MetricsReport.write(out)``::

    out/report.csv      one row per (trial, algorithm)
    out/summary.json    config, per-algorithm mean/std, failure and connectivity counts
    out/trace.jsonl     per-localization audit records (only when tracing)

``run_sweep`` writes one such directory per grid point under
``out/<axis>_<value>/`` plus ``out/sweep_<axis>.csv`` in long format
(axis, value, algo, metric, mean, std).
"""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .afala import SeedError, run_afala
from .baselines import run_naive_bilateration, run_tla
from .netmodel import NetworkInstance, ScenarioConfig, make_instance

ALGORITHMS = {
    "afala": run_afala,
    "tla": run_tla,
    "bilat": run_naive_bilateration,
}

CSV_COLUMNS = [
    "trial", "algo", "n", "r", "delta", "dmax", "epsilon_mode", "triangle_mode",
    "pct_localized", "avg_err", "flips", "runtime_ms", "failed",
]

METRICS = ("pct_localized", "avg_err", "flips", "runtime_ms")

ERROR_LEVELS = (0.0, 0.02, 0.2, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
MOTION_LEVELS = tuple(round(0.2 * k, 1) for k in range(11))
DENSITY_STEP = 25
DENSITY_LEVELS = tuple(range(50, 201, DENSITY_STEP))


def compute_metrics(state, inst: NetworkInstance) -> dict:
    """Percent localized, mean error over localized nodes (None if none), flip count."""
    est = state.estimates
    errs = [float(np.hypot(*(np.asarray(est[k]) - inst.positions[k]))) for k in est]
    return {
        "pct_localized": 100.0 * len(est) / inst.n,
        "avg_err": float(np.mean(errs)) if errs else None,
        "flips": len(state.flip_events),
    }


def trial_streams(master_seed: int, trial: int):
    """(instance stream, algorithm seed) for one trial.

    Every algorithm of the trial gets a generator built from the same seed.
    """
    inst_ss, algo_ss = np.random.SeedSequence([master_seed, trial]).spawn(2)
    return np.random.default_rng(inst_ss), algo_ss


def run_trial(cfg: ScenarioConfig, trial: int, algorithms: Iterable[str], *, timing: bool = True, trace: bool = False):
    inst_rng, algo_ss = trial_streams(cfg.seed, trial)
    inst = make_instance(cfg, inst_rng)
    rows, traces = [], []
    for algo in algorithms:
        row = {
            "trial": trial, "algo": algo, "n": cfg.n, "r": cfg.r, "delta": cfg.delta, "dmax": cfg.d_max,
            "epsilon_mode": cfg.epsilon_mode, "triangle_mode": cfg.triangle_mode,
        }
        t0 = time.perf_counter()
        try:
            state = ALGORITHMS[algo](inst, cfg, np.random.default_rng(algo_ss))
        except SeedError:
            row.update(pct_localized=0.0, avg_err=None, flips=0, failed=1)
            state = None
        else:
            row.update(compute_metrics(state, inst), failed=0)
        row["runtime_ms"] = round(1000 * (time.perf_counter() - t0), 3) if timing else 0.0
        rows.append(row)
        if trace and state is not None:
            traces.extend({"trial": trial, "algo": algo, **rec} for rec in state.trace)
    return rows, traces, inst.is_connected()


def _stats(values) -> dict:
    vals = [v for v in values if v is not None]
    if not vals:
        return {"mean": None, "std": None, "count": 0}
    return {"mean": float(np.mean(vals)), "std": float(np.std(vals)), "count": len(vals)}


def aggregate(rows) -> dict:
    """Per-algorithm mean/std of every metric; ``avg_err`` skips trials with no estimate."""
    out = {}
    for algo in dict.fromkeys(r["algo"] for r in rows):
        sel = [r for r in rows if r["algo"] == algo]
        out[algo] = {m: _stats(r[m] for r in sel) for m in METRICS}
        out[algo]["failed"] = sum(r["failed"] for r in sel)
    return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass
class MetricsReport:
    config: ScenarioConfig
    algorithms: list
    rows: list
    connected: list = field(default_factory=list)
    traces: list = field(default_factory=list)

    @property
    def aggregates(self) -> dict:
        return aggregate(self.rows)

    def summary(self) -> dict:
        return {
            "config": self.config.to_dict(),
            "epsilon": self.config.epsilon,
            "grid_res": self.config.h,
            "algorithms": self.algorithms,
            "trials": self.config.trials,
            "connected_trials": int(sum(self.connected)),
            "aggregates": self.aggregates,
        }

    def rows_for(self, algo: str) -> list:
        return [r for r in self.rows if r["algo"] == algo]

    def write(self, out) -> Path:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        with open(out / "summary.json", "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        if self.traces:
            with open(out / "trace.jsonl", "w") as fh:
                for rec in self.traces:
                    fh.write(json.dumps(rec, sort_keys=True) + "\n")
        return out


def read_report_csv(path) -> list:
    """Rows of a ``report.csv`` with numeric fields parsed back."""
    ints = {"trial", "n", "flips", "failed"}
    floats = {"r", "delta", "dmax", "pct_localized", "avg_err", "runtime_ms"}
    rows = []
    with open(path, newline="") as fh:
        for raw in csv.DictReader(fh):
            row = dict(raw)
            for k in ints:
                row[k] = int(row[k])
            for k in floats:
                row[k] = float(row[k]) if row[k] != "" else None
            rows.append(row)
    return rows


def _trial_job(args):
    cfg, trial, algorithms, timing, trace = args
    return run_trial(cfg, trial, algorithms, timing=timing, trace=trace)


def run_experiment(cfg: ScenarioConfig, algorithms=("afala",), *, workers: int = 1, timing: bool = True,
                   trace: bool = False) -> MetricsReport:
    """Run ``cfg.trials`` paired trials; results are merged in trial order."""
    algorithms = list(algorithms)
    unknown = [a for a in algorithms if a not in ALGORITHMS]
    if unknown:
        raise ValueError(f"unknown algorithms: {unknown}")
    jobs = [(cfg, t, algorithms, timing, trace) for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_trial_job, jobs))
    else:
        results = [_trial_job(j) for j in jobs]
    rows, traces, connected = [], [], []
    for r, tr, conn in results:
        rows.extend(r)
        traces.extend(tr)
        connected.append(conn)
    return MetricsReport(cfg, algorithms, rows, connected, traces)


SWEEP_AXES = ("triangle", "error", "density", "motion")


def sweep_points(axis: str, base: ScenarioConfig) -> list:
    """(value, config) per grid point, every other field held at ``base``."""
    if axis == "triangle":
        return [(m, base.replace(triangle_mode=m)) for m in ("random", "special")]
    if axis == "error":
        return [(d, base.replace(delta=d)) for d in ERROR_LEVELS]
    if axis == "density":
        return [(n, base.replace(n=n)) for n in DENSITY_LEVELS]
    if axis == "motion":
        return [(d, base.replace(d_max=d, epsilon_mode="errorPlusMotion")) for d in MOTION_LEVELS]
    raise ValueError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")


def run_sweep(axis: str, base: ScenarioConfig, out, algorithms=("afala", "tla", "bilat"), *,
              workers: int = 1, timing: bool = True, trace: bool = False) -> dict:
    """Run every grid point of ``axis`` and write per-point reports plus a long-format CSV."""
    out = Path(out)
    points = sweep_points(axis, base)
    reports = {}
    long_rows = []
    for value, cfg in points:
        rep = run_experiment(cfg, algorithms, workers=workers, timing=timing, trace=trace)
        rep.write(out / f"{axis}_{value}")
        reports[value] = rep
        for algo, agg in rep.aggregates.items():
            for metric in METRICS:
                long_rows.append([axis, value, algo, metric, agg[metric]["mean"], agg[metric]["std"]])
    out.mkdir(parents=True, exist_ok=True)
    with open(out / f"sweep_{axis}.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["axis", "value", "algo", "metric", "mean", "std"])
        for row in long_rows:
            w.writerow([_fmt(v) for v in row])
    return reports


def slope(xs, ys) -> float:
    """Least-squares slope of ``ys`` against ``xs``."""
    xs, ys = np.asarray(xs, float), np.asarray(ys, float)
    if len(xs) < 2 or math.isclose(float(np.ptp(xs)), 0.0):
        raise ValueError("need at least two distinct x values")
    return float(np.polyfit(xs, ys, 1)[0])


def load_config(path: Optional[str], **overrides) -> ScenarioConfig:
    cfg = ScenarioConfig.from_json(path) if path else ScenarioConfig()
    changes = {k: v for k, v in overrides.items() if v is not None}
    return cfg.replace(**changes) if changes else cfg
