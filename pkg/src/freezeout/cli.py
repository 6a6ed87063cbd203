"""Command-line front end: ``freezeout {schedule,estimate,train,sweep}``.

Exit codes: 0 success, 2 bad usage or configuration, 3 numerical blow-up.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import config as config_mod
from .cost_model import CostProfile, estimate_speedup, layer_contributions
from .errors import ConfigurationError, NumericalError, UndefinedSpeedupError
from .layers import ModelSpec, build
from .schedule import (DEFAULT_STRATEGY, DEFAULT_T0, STRATEGIES, ScheduleParams,
                       ScheduleStrategy, compute_t_schedule, dump_schedule, write_schedule_csv)
from .sweep import RESULT_FIELDS, SUMMARY_FIELDS, aggregate, run_sweep, write_csv
from .training import TrainConfig, make_dataset, train

LOG_DIR_ENV = "FREEZEOUT_LOG_DIR"
STRATEGY_NAMES = [s.name for s in STRATEGIES]


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _strategies(text):
    names = [v.strip() for v in text.split(",") if v.strip()]
    for n in names:
        if n not in STRATEGY_NAMES:
            raise argparse.ArgumentTypeError(f"unknown strategy {n!r}; choose from {STRATEGY_NAMES}")
    return names


def _load_config(args):
    cfg = config_mod.load(args.config) if args.config else TrainConfig()
    return config_mod.apply_overrides(cfg, args.set or [])


def _log_destination(path, default_name):
    env = os.environ.get(LOG_DIR_ENV)
    if env:
        return str(Path(env) / (Path(path).name if path else default_name))
    return path or None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_schedule(args):
    params = ScheduleParams(args.t0, args.alpha, args.layers, ScheduleStrategy.from_name(args.strategy))
    rows = dump_schedule(params, args.iters)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_schedule_csv(rows, fh)
    else:
        write_schedule_csv(rows, sys.stdout)
    return 0


def cmd_estimate(args):
    if args.costs is not None:
        costs = args.costs
        strategy = ScheduleStrategy.from_name(args.strategy or DEFAULT_STRATEGY.name)
        t0 = args.t0 if args.t0 is not None else DEFAULT_T0
        n_itr = args.iters or 1
        correction = args.correction
    else:
        cfg = _load_config(args)
        ds = make_dataset(cfg.data)
        spec = ModelSpec(cfg.model.architecture, list(cfg.model.widths), ds.input_shape,
                         ds.num_classes, cfg.model.depth, cfg.model.bn_momentum)
        costs = build(spec, seed=cfg.train.seed).forward_flops()
        strategy = ScheduleStrategy.from_name(args.strategy or cfg.freezeout.strategy)
        t0 = args.t0 if args.t0 is not None else cfg.freezeout.t0
        n_itr = args.iters or cfg.train.n_itr
        correction = args.correction if args.correction is not None else cfg.freezeout.linear_correction
    if correction is None:
        correction = 1.3
    if not costs:
        raise ConfigurationError("no layer costs given")
    ts = compute_t_schedule(ScheduleParams(t0, 1.0, len(costs), strategy))
    profile = CostProfile(costs, n_itr)
    est = estimate_speedup(profile, ts, strategy.spacing, correction)
    contrib = layer_contributions(profile, ts)
    if args.json:
        out = {"strategy": strategy.name, "t0": t0, "n_itr": n_itr,
               "layers": [{"layer": i, "c": c, "t": t, "contribution": x}
                          for i, (c, t, x) in enumerate(zip(costs, ts, contrib))]}
        out.update(est.as_dict())
        json.dump(out, sys.stdout, indent=2)
        sys.stdout.write("\n")
        return 0
    print(f"strategy={strategy.name} t0={t0:g} n_itr={n_itr}")
    print(f"{'layer':>5}  {'c_i':>14}  {'t_i':>10}  {'contribution':>16}")
    for i, (c, t, x) in enumerate(zip(costs, ts, contrib)):
        print(f"{i:>5}  {c:>14g}  {t:>10.6f}  {x:>16.6g}")
    print(f"C   = {est.baseline_cost:.9g}")
    print(f"C_f = {est.freezeout_cost:.9g}")
    print(f"raw speedup       = {est.raw_speedup:.6f}")
    print(f"corrected speedup = {est.corrected_speedup:.6f} (x{est.correction_factor:g})")
    return 0


def cmd_train(args):
    cfg = _load_config(args)
    if args.baseline:
        cfg.freezeout.enabled = False
    log = _log_destination(args.log or cfg.train.log_path, "train.jsonl")
    result = train(cfg, log_path=log)
    print(json.dumps(result.summary))
    return 0


def cmd_sweep(args):
    cfg = _load_config(args)
    log_dir = os.environ.get(LOG_DIR_ENV) or args.log_dir
    rows = run_sweep(cfg, args.t0, args.strategies, args.seeds, workers=args.workers,
                     baseline=args.baseline, log_dir=log_dir)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            write_csv(rows, RESULT_FIELDS, fh)
    else:
        write_csv(rows, RESULT_FIELDS, sys.stdout)
    summary = aggregate(rows)
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            write_csv(summary, SUMMARY_FIELDS, fh)
    else:
        print(file=sys.stderr)
        write_csv(summary, SUMMARY_FIELDS, sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    """Usage errors as one greppable line instead of a usage dump."""

    def error(self, message):
        self.exit(2, f"{self.prog}: error: {message}\n")


def _config_args(p):
    p.add_argument("--config", help="TOML config with [model] [data] [train] [freezeout]")
    p.add_argument("--set", action="append", metavar="SECTION.KEY=VALUE",
                   help="override a config value (repeatable)")


def build_parser():
    parser = _Parser(prog="freezeout", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("schedule", help="dump per-layer learning-rate schedules as CSV")
    p.add_argument("--t0", type=float, default=DEFAULT_T0)
    p.add_argument("--layers", type=int, default=5)
    p.add_argument("--strategy", choices=STRATEGY_NAMES, default=DEFAULT_STRATEGY.name)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("estimate", help="predict compute savings from layer costs")
    p.add_argument("--costs", type=_floats, help="comma-separated per-layer forward costs")
    _config_args(p)
    p.add_argument("--strategy", choices=STRATEGY_NAMES)
    p.add_argument("--t0", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--correction", type=float, help="linear-spacing correction factor")
    p.add_argument("--json", action="store_true", help="emit JSON instead of a table")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("train", help="run one training job")
    _config_args(p)
    p.add_argument("--log", help="JSONL metrics path")
    p.add_argument("--baseline", action="store_true", help="plain cosine schedule, no freezing")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train the strategy x t0 x seed cross product")
    _config_args(p)
    p.add_argument("--t0", type=_floats, default=[0.8, 0.5, 0.3])
    p.add_argument("--strategies", type=_strategies, default=[DEFAULT_STRATEGY.name])
    p.add_argument("--seeds", type=_ints, default=[0])
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--baseline", action="store_true", help="add a no-freeze run per seed")
    p.add_argument("--log-dir", help="directory for per-run JSONL logs")
    p.add_argument("-o", "--output", help="per-run CSV (default stdout)")
    p.add_argument("--summary", help="per-group mean/std CSV (default stderr)")
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, UndefinedSpeedupError) as exc:
        print(f"freezeout {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"freezeout {args.command}: numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
