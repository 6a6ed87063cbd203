"""Cross-product sweeps over strategy, t_0 and seed."""
from __future__ import annotations

import copy
import csv
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .errors import ConfigurationError
from .training import train

RESULT_FIELDS = ("strategy", "t0", "seed", "final_accuracy", "measured_savings",
                 "predicted_savings", "status")
SUMMARY_FIELDS = ("strategy", "t0", "runs", "accuracy_mean", "accuracy_std",
                  "measured_savings_mean", "measured_savings_std", "predicted_savings")
BASELINE = "baseline"


def _run_one(job):
    config, strategy, t0, seed, log_path = job
    cfg = copy.deepcopy(config)
    cfg.train.seed = seed
    if strategy == BASELINE:
        cfg.freezeout.enabled = False
    else:
        cfg.freezeout.enabled = True
        cfg.freezeout.strategy = strategy
        cfg.freezeout.t0 = t0
    row = {"strategy": strategy, "t0": t0, "seed": seed}
    try:
        s = train(cfg, log_path=log_path).summary
    except Exception as exc:  # a failed run is recorded, the sweep goes on
        row.update(final_accuracy=math.nan, measured_savings=math.nan,
                   predicted_savings=math.nan, status=f"failed: {type(exc).__name__}: {exc}")
        return row
    row.update(final_accuracy=s["final_accuracy"], measured_savings=s["measured_savings"],
               predicted_savings=s["predicted_savings"], status="ok")
    return row


def run_sweep(config, t0s, strategies, seeds, workers=1, baseline=False, log_dir=None):
    """Train every (strategy, t0, seed) combination and return one row per run.

    With ``baseline`` an extra no-FreezeOut run per seed is added under the
    strategy name ``baseline`` with ``t0 = 1``.
    """
    if not t0s or not strategies or not seeds:
        raise ConfigurationError("t0s, strategies and seeds must all be non-empty")
    combos = list(itertools.product(strategies, t0s, seeds))
    if baseline:
        combos += [(BASELINE, 1.0, s) for s in seeds]
    jobs = []
    for strategy, t0, seed in combos:
        log = None
        if log_dir:
            log = str(Path(log_dir) / f"{strategy}_t0-{t0:g}_seed-{seed}.jsonl")
        jobs.append((config, strategy, float(t0), int(seed), log))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_one, jobs))
    return [_run_one(j) for j in jobs]


def aggregate(rows):
    """Mean and population std (0 for a single seed) per (strategy, t0)."""
    groups = {}
    for r in rows:
        if r["status"] == "ok":
            groups.setdefault((r["strategy"], r["t0"]), []).append(r)
    out = []
    for (strategy, t0), rs in groups.items():
        acc = np.array([r["final_accuracy"] for r in rs], dtype=float)
        sav = np.array([r["measured_savings"] for r in rs], dtype=float)
        out.append({"strategy": strategy, "t0": t0, "runs": len(rs),
                    "accuracy_mean": float(acc.mean()), "accuracy_std": float(acc.std()),
                    "measured_savings_mean": float(sav.mean()),
                    "measured_savings_std": float(sav.std()),
                    "predicted_savings": rs[0]["predicted_savings"]})
    return out


def write_csv(rows, fields, fh):
    w = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    w.writerows(rows)
