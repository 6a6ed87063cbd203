"""Training loop with per-layer FreezeOut learning rates.

Each iteration computes the normalized time ``t = k / n_itr``, freezes every
block whose schedule has run out (always a prefix of the network), runs the
forward pass with that prefix in inference mode, backpropagates only down to
the first trainable block, and applies a Nesterov step to the trainable
blocks. Frozen blocks are left out of the optimizer entirely.
"""
from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data as data_mod
from .autodiff import softmax_cross_entropy
from .cost_model import CostProfile, estimate_speedup, measured_backward_savings
from .errors import ConfigurationError, NumericalError
from .layers import ModelSpec, build
from .schedule import (DEFAULT_T0, ScheduleParams, ScheduleStrategy, cosine_lr,
                       is_frozen, layer_schedules, lr_at)

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

@dataclass
class ModelConfig:
    architecture: str = "mlp-plain"
    widths: list = field(default_factory=lambda: [32])
    depth: int = 7
    bn_momentum: float = 0.1


@dataclass
class DataConfig:
    kind: str = "two-spirals"
    n: int = 200
    noise: float = 0.0
    seed: int = 0
    test_fraction: float = 0.2
    num_classes: int = 4
    image_size: int = 8
    path: str = ""
    num_features: int = 2


@dataclass
class TrainSection:
    n_itr: int = 1000
    batch_size: int = 64
    alpha: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    log_path: str = ""


@dataclass
class FreezeoutConfig:
    enabled: bool = True
    strategy: str = "cubic-scaled"
    t0: float = DEFAULT_T0
    linear_correction: float = 1.3


@dataclass
class TrainConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    data: DataConfig = field(default_factory=DataConfig)
    train: TrainSection = field(default_factory=TrainSection)
    freezeout: FreezeoutConfig = field(default_factory=FreezeoutConfig)

    def validate(self):
        tr, fo = self.train, self.freezeout
        if tr.n_itr < 1:
            raise ConfigurationError("train.n_itr must be >= 1")
        if tr.batch_size < 1:
            raise ConfigurationError("train.batch_size must be >= 1")
        if not tr.alpha > 0:
            raise ConfigurationError("train.alpha must be positive")
        if not 0.0 <= tr.momentum < 1.0:
            raise ConfigurationError("train.momentum must lie in [0, 1)")
        if tr.weight_decay < 0:
            raise ConfigurationError("train.weight_decay must be >= 0")
        if not 0.0 < fo.t0 <= 1.0:
            raise ConfigurationError("freezeout.t0 must lie in (0, 1]")
        ScheduleStrategy.from_name(fo.strategy)
        return self


# ---------------------------------------------------------------------------
# records and optimizer
# ---------------------------------------------------------------------------

@dataclass
class MetricsRecord:
    iteration: int
    t: float
    loss: float
    lr: list
    first_unfrozen: int
    forward_macs: int
    backward_macs: int
    wall_time_ms: float

    def to_dict(self):
        return asdict(self)


@dataclass
class OptimizerState:
    """Per-block velocity buffers keyed like ``Block.params``."""

    velocities: list
    momentum: float

    @classmethod
    def zeros(cls, network, momentum):
        return cls([{k: np.zeros_like(v) for k, v in b.params.items()} for b in network.blocks],
                   momentum)


def nesterov_step(params, grads, velocities, lr, momentum, weight_decay=0.0):
    """In-place Nesterov update: v <- mu v - lr g; theta <- theta + mu v - lr g."""
    for name, theta in params.items():
        g = grads[name]
        if weight_decay:
            g = g + weight_decay * theta
        v = velocities[name]
        v *= momentum
        v -= lr * g
        theta += momentum * v - lr * g


@dataclass
class EvalResult:
    accuracy: float
    loss: float


def evaluate(network, x, y, batch_size=None):
    """Accuracy and mean cross-entropy with every block in inference mode.

    Training MAC counters are left untouched.
    """
    y = np.asarray(y)
    if len(y) == 0:
        raise ConfigurationError("cannot evaluate on an empty split")
    saved = dict(network.counters)
    bs = len(y) if batch_size is None else batch_size
    correct, loss_sum = 0, 0.0
    for s in range(0, len(y), bs):
        out = network.forward(x[s:s + bs], train=False)
        loss, _ = softmax_cross_entropy(out, y[s:s + bs])
        loss_sum += loss * len(out)
        correct += int((out.argmax(axis=1) == y[s:s + bs]).sum())
    network.counters = saved
    return EvalResult(correct / len(y), loss_sum / len(y))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def make_dataset(cfg):
    if cfg.kind == "two-spirals":
        return data_mod.gen_two_spirals(cfg.n, cfg.noise, cfg.seed, cfg.test_fraction)
    if cfg.kind == "toy-images":
        return data_mod.gen_toy_images(cfg.num_classes, cfg.image_size, cfg.n, cfg.seed,
                                       cfg.noise, cfg.test_fraction)
    if cfg.kind == "csv":
        if not cfg.path:
            raise ConfigurationError("data.path is required for kind = 'csv'")
        return data_mod.load_csv(cfg.path, cfg.num_features, cfg.num_classes,
                                 cfg.test_fraction, cfg.seed)
    raise ConfigurationError(f"unknown data.kind {cfg.kind!r}")


def _batches(n, batch_size, rng):
    batch_size = min(batch_size, n)
    while True:
        order = rng.permutation(n)
        for s in range(0, n - batch_size + 1, batch_size):
            yield order[s:s + batch_size]


@dataclass
class TrainResult:
    network: object
    records: list
    summary: dict
    schedules: list | None
    state: OptimizerState


def train(config, dataset=None, callback=None, log_path=None):
    """Run one training job and return the network, metrics log, and summary.

    ``callback(iteration, network, state)`` fires after every optimizer step.
    Metrics go to ``log_path`` (or ``config.train.log_path``) as JSON lines,
    followed by one summary line.
    """
    config.validate()
    tr, fo = config.train, config.freezeout
    ds = dataset if dataset is not None else make_dataset(config.data)
    spec = ModelSpec(config.model.architecture, list(config.model.widths), ds.input_shape,
                     ds.num_classes, config.model.depth, config.model.bn_momentum)
    net = build(spec, seed=tr.seed)
    n_layers, n_itr = len(net), tr.n_itr

    strategy = ScheduleStrategy.from_name(fo.strategy)
    scheds = None
    if fo.enabled:
        scheds = layer_schedules(ScheduleParams(fo.t0, tr.alpha, n_layers, strategy))
    state = OptimizerState.zeros(net, tr.momentum)
    batch_rng = np.random.default_rng([tr.seed, 1])
    batches = _batches(len(ds.train_y), tr.batch_size, batch_rng)

    path = log_path or tr.log_path
    fh = None
    if path:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w")
    records = []
    try:
        for k in range(n_itr):
            start = time.perf_counter()
            t = k / n_itr
            if scheds is None:
                lrs = [cosine_lr(tr.alpha, t)] * n_layers
                first = 0
            else:
                lrs = [lr_at(s, t) for s in scheds]
                first = sum(is_frozen(s, t) for s in scheds)
            net.freeze_prefix(first)

            idx = next(batches)
            try:
                out = net.forward(ds.train_x[idx], train=True)
                loss, grad = softmax_cross_entropy(out, ds.train_y[idx])
                if not math.isfinite(loss):
                    raise NumericalError(f"non-finite loss at iteration {k}")
            except NumericalError as exc:
                diag = {"iteration": k, "t": t, "error": str(exc), "layer": exc.layer}
                logger.error("aborting: %s", exc)
                if fh:
                    fh.write(json.dumps(diag) + "\n")
                raise

            grads = net.backward_from(grad, first)
            for i in range(first, n_layers):
                nesterov_step(net.blocks[i].params, grads[i], state.velocities[i], lrs[i],
                              tr.momentum, tr.weight_decay)

            rec = MetricsRecord(k, t, loss, list(lrs), first,
                                net.counters["forward_macs"], net.counters["backward_macs"],
                                (time.perf_counter() - start) * 1e3)
            records.append(rec)
            if fh:
                fh.write(json.dumps(rec.to_dict()) + "\n")
            if callback is not None:
                callback(k, net, state)

        result = evaluate(net, ds.test_x, ds.test_y) if len(ds.test_y) else None
        ts = [s.t_i for s in scheds] if scheds else [1.0] * n_layers
        est = estimate_speedup(CostProfile(net.forward_flops(), n_itr), ts, strategy.spacing,
                               fo.linear_correction)
        summary = {"final_accuracy": result.accuracy if result else None,
                   "measured_savings": measured_backward_savings(records),
                   "predicted_savings": est.raw_speedup}
        if fh:
            fh.write(json.dumps(summary) + "\n")
    finally:
        if fh:
            fh.close()
    return TrainResult(net, records, summary, scheds, state)
