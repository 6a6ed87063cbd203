"""Acceptance criteria 1-8, one test each.

Every test records ``(passed, detail)`` in ``conftest.ACCEPTANCE`` before
asserting, so the terminal summary prints one PASS/FAIL line per criterion
even when a criterion fails.
"""
import hashlib
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE, ZOO, small_spec
from freezeout import config as config_mod
from freezeout.autodiff import gradient_check
from freezeout.cost_model import CostProfile, estimate_speedup
from freezeout.layers import build
from freezeout.schedule import (STRATEGIES, ScheduleParams, ScheduleStrategy, compute_t_schedule,
                                layer_schedules, lr_at)
from freezeout.sweep import BASELINE, aggregate, run_sweep
from freezeout.training import TrainConfig, train

C7_SEEDS = list(range(10))
C7_T0S = [0.8, 0.5, 0.3]


def record(criterion, ok, detail):
    ACCEPTANCE[criterion] = (bool(ok), detail)
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}")
    assert ok, detail


def small_config(**overrides):
    base = ["model.widths=[8]", "model.depth=4", "data.n=60", "train.n_itr=120",
            "train.batch_size=16"]
    return config_mod.apply_overrides(TrainConfig(),
                                      base + [f"{k}={v}" for k, v in overrides.items()])


def test_criterion_1_schedule_exactness():
    start = time.perf_counter()
    worst = 0.0
    for strategy in STRATEGIES:
        for s in layer_schedules(ScheduleParams(0.5, 0.1, 5, strategy)):
            worst = max(worst, abs(lr_at(s, 0.0) - s.alpha_0),
                        abs(lr_at(s, s.t_i / 2) - s.alpha_0 / 2))
            if lr_at(s, s.t_i) != 0.0:
                worst = math.inf
    cube_half = compute_t_schedule(ScheduleParams(0.5, 0.1, 5, "cubic-unscaled"))[0]
    cube_eight = compute_t_schedule(ScheduleParams(0.8, 0.1, 5, "cubic-scaled"))[0]
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-12 and cube_half == 0.125 and cube_eight == 0.512 and elapsed < 1
    record(1, ok, f"max cosine error {worst:.1e}, cubic t_0 {cube_half!r} / {cube_eight!r}, "
                  f"{elapsed:.3f}s")


def test_criterion_2_equal_distance():
    start = time.perf_counter()
    alpha, worst = 0.1, 0.0
    for name in ("linear-scaled", "cubic-scaled"):
        for t0 in (0.8, 0.5, 0.3):
            for s in layer_schedules(ScheduleParams(t0, alpha, 6, name)):
                t = np.linspace(0.0, s.t_i, 100_000)
                lr = 0.5 * s.alpha_0 * (1.0 + np.cos(np.pi * t / s.t_i))
                lr[-1] = lr_at(s, s.t_i)
                # spot-check the vectorized curve against the scalar one
                assert lr[12345] == pytest.approx(lr_at(s, t[12345]), rel=1e-14)
                worst = max(worst, abs(np.trapezoid(lr, t) - alpha / 2) / (alpha / 2))
    elapsed = time.perf_counter() - start
    record(2, worst < 1e-6 and elapsed < 5,
           f"max relative deviation from alpha/2 {worst:.1e}, {elapsed:.2f}s")


def _trajectory(cfg):
    digests = []

    def cb(k, net, state):
        h = hashlib.sha256()
        for _, _, arr in net.parameters():
            h.update(arr.tobytes())
        digests.append(h.hexdigest())

    train(cfg, callback=cb)
    return digests


def test_criterion_3_reduction_equivalence():
    start = time.perf_counter()
    cfg = TrainConfig()
    cfg.train.n_itr = 500
    cfg.freezeout.t0 = 1.0
    freezeout_run = _trajectory(cfg)
    cfg.freezeout.enabled = False
    baseline_run = _trajectory(cfg)
    elapsed = time.perf_counter() - start
    same = sum(a == b for a, b in zip(freezeout_run, baseline_run))
    ok = len(freezeout_run) == 500 and same == 500 and elapsed < 60
    record(3, ok, f"{same}/500 iterations bitwise identical, {elapsed:.1f}s")


def test_criterion_4_freeze_is_final():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    violations, frozen_checks, triples = 0, 0, 30
    for _ in range(triples):
        strategy = STRATEGIES[rng.integers(len(STRATEGIES))].name
        t0 = float(rng.uniform(0.1, 0.9))
        seed = int(rng.integers(1_000_000))
        at_freeze = {}

        def cb(k, net, state):
            nonlocal violations, frozen_checks
            for i in range(net.first_unfrozen):
                b = net.blocks[i]
                snap = (tuple(a.tobytes() for a in b.params.values()),
                        tuple(a.tobytes() for a in b.buffers.values()),
                        tuple(a.tobytes() for a in state.velocities[i].values()))
                if at_freeze.setdefault(i, snap) != snap:
                    violations += 1
                frozen_checks += 1

        train(small_config(**{"freezeout.strategy": strategy, "freezeout.t0": t0,
                              "train.seed": seed}), callback=cb)
    elapsed = time.perf_counter() - start
    ok = violations == 0 and frozen_checks > 0 and elapsed < 300
    record(4, ok, f"{triples} (strategy, t0, seed) triples, {frozen_checks} frozen-block "
                  f"snapshots, {violations} changes, {elapsed:.1f}s")


def _c5_configs():
    yield "mlp-plain", "linear-unscaled", 0.5, 100
    for arch, _ in ZOO:
        for strategy, t0 in (("cubic-scaled", 0.8), ("linear-scaled", 0.35)):
            yield arch, strategy, t0, 61


def test_criterion_5_cost_model_equivalence():
    start = time.perf_counter()
    configs, counter_ok, worst = 0, True, 0.0
    for arch, strategy, t0, n_itr in _c5_configs():
        kind = "toy-images" if arch.startswith("cnn") else "two-spirals"
        cfg = small_config(**{"model.architecture": f'"{arch}"', "data.kind": f'"{kind}"',
                              "freezeout.strategy": strategy, "freezeout.t0": t0,
                              "train.n_itr": n_itr, "model.depth": 3})
        res = train(cfg)
        c = res.network.forward_flops()
        ts = [s.t_i for s in res.schedules]
        expected_backward = sum(ci * math.ceil(t * n_itr) for ci, t in zip(c, ts))
        counter_ok &= res.records[-1].backward_macs == expected_backward
        # the savings formula written out term by term
        by_hand = 1 - sum((1 + t) * ci * n_itr for ci, t in zip(c, ts)) / sum(
            2 * ci * n_itr for ci in c)
        spacing = ScheduleStrategy.from_name(strategy).spacing
        raw = estimate_speedup(CostProfile(c, n_itr), ts, spacing).raw_speedup
        worst = max(worst, abs(raw - by_hand), abs(res.summary["predicted_savings"] - by_hand))
        configs += 1
    hand = estimate_speedup(CostProfile([1, 1, 1, 1], 1),
                            compute_t_schedule(ScheduleParams(0.5, 0.1, 4, "linear-unscaled")),
                            "linear")
    hand_ok = (abs(hand.raw_speedup - 0.125) <= 1e-12
               and abs(hand.corrected_speedup - 0.1625) <= 1e-12)
    elapsed = time.perf_counter() - start
    ok = counter_ok and worst <= 1e-12 and hand_ok and configs >= 10 and elapsed < 60
    record(5, ok, f"{configs} trained configs, counters exact={counter_ok}, max speedup "
                  f"error {worst:.1e}, hand example raw={hand.raw_speedup:.4f} "
                  f"corrected={hand.corrected_speedup:.4f}, {elapsed:.1f}s")


def randomize_parameters(net, rng):
    """Move every parameter off its initial value.

    At initialization (beta = 0, zero biases) a block is positively homogeneous
    in the stem's gamma up to the next batch norm, so that gradient is ~0 and
    a relative error there only measures finite-difference roundoff.
    """
    for _, name, arr in net.parameters():
        if name.endswith("gamma"):
            arr[...] = rng.uniform(0.5, 1.5, arr.shape)
        elif not name.endswith("weight"):
            arr[...] = rng.normal(0.0, 0.5, arr.shape)
    return net


def test_criterion_6_gradient_correctness():
    start = time.perf_counter()
    errors = {}
    for k, (arch, shape) in enumerate(ZOO):
        net = randomize_parameters(build(small_spec(arch, shape), seed=100 + k),
                                   np.random.default_rng(500 + k))
        x = np.random.default_rng(k).standard_normal((5,) + shape)
        labels = np.arange(5) % 3
        errors[arch] = max(gradient_check(net, x, epsilon=1e-6, labels=labels),
                           gradient_check(net, x, epsilon=1e-6))
    elapsed = time.perf_counter() - start
    worst = max(errors.values())
    record(6, worst < 1e-4 and elapsed < 120,
           f"max relative error {worst:.1e} over {', '.join(errors)}, {elapsed:.1f}s")


@pytest.fixture(scope="module")
def tradeoff_sweep(tmp_path_factory):
    log_dir = tmp_path_factory.mktemp("tradeoff_logs")
    cfg = TrainConfig()  # two-spirals, 7 hidden blocks + head = 8 blocks
    start = time.perf_counter()
    rows = run_sweep(cfg, C7_T0S, ["cubic-scaled"], C7_SEEDS, baseline=True,
                     log_dir=str(log_dir))
    return rows, log_dir, time.perf_counter() - start


def test_criterion_7_tradeoff(tradeoff_sweep):
    rows, _, elapsed = tradeoff_sweep
    groups = {(g["strategy"], g["t0"]): g for g in aggregate(rows)}
    baseline = groups[(BASELINE, 1.0)]
    savings = [groups[("cubic-scaled", t0)]["measured_savings_mean"] for t0 in C7_T0S]
    accs = [groups[("cubic-scaled", t0)]["accuracy_mean"] for t0 in C7_T0S]
    monotone = all(a < b for a, b in zip(savings, savings[1:]))
    gap = baseline["accuracy_mean"] - accs[0]
    all_ok = all(r["status"] == "ok" for r in rows) and len(rows) == 40
    ok = monotone and abs(gap) <= 0.05 and all_ok and elapsed < 600
    record(7, ok, "savings " + " < ".join(f"{s:.3f}" for s in savings)
           + f" for t0 {C7_T0S}; accuracy {accs[0]:.3f} at 0.8 vs baseline "
             f"{baseline['accuracy_mean']:.3f} ({gap * 100:+.1f} pp); {elapsed:.0f}s")


def test_criterion_8_monotone_prefix(tradeoff_sweep):
    _, log_dir, _ = tradeoff_sweep
    files = sorted(log_dir.glob("*.jsonl"))
    checked, problems = 0, []
    for path in files:
        lines = [json.loads(l) for l in path.read_text().splitlines()]
        records = [r for r in lines if "iteration" in r]
        if "baseline" in path.name:
            ts = None
        else:
            t0 = float(path.name.split("_t0-")[1].split("_")[0])
            ts = compute_t_schedule(ScheduleParams(t0, 0.1, len(records[0]["lr"]),
                                                   "cubic-scaled"))
        previous = 0
        for r in records:
            first = r["first_unfrozen"]
            zero_lr = [i for i, lr in enumerate(r["lr"]) if lr == 0.0]
            if zero_lr != list(range(first)):
                problems.append(f"{path.name}@{r['iteration']}: frozen set {zero_lr}")
            if ts is not None:
                by_time = [i for i, t in enumerate(ts) if r["t"] >= t]
                if by_time != list(range(first)):
                    problems.append(f"{path.name}@{r['iteration']}: schedule says {by_time}")
            if first < previous:
                problems.append(f"{path.name}@{r['iteration']}: first_unfrozen decreased")
            previous = first
            checked += 1
    ok = not problems and len(files) == 40 and checked == 40 * 1000
    record(8, ok, f"{checked} logged iterations across {len(files)} runs, "
                  f"{len(problems)} violations" + (f" (first: {problems[0]})" if problems else ""))
