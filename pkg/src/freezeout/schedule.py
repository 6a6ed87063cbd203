"""Per-layer FreezeOut learning-rate schedules.

Every layer ``i`` anneals its rate with half a cosine period that ends at its
own freeze time ``t_i`` (normalized to the run length), then stays frozen.
Freeze times are spaced linearly from ``t_0`` to 1, optionally cubed, and the
initial rates are either shared or scaled by ``1 / t_i``.
"""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from decimal import Decimal, localcontext

from .errors import ConfigurationError

SPACINGS = ("linear", "cubic")


@dataclass(frozen=True)
class ScheduleStrategy:
    spacing: str
    scaled: bool

    def __post_init__(self):
        if self.spacing not in SPACINGS:
            raise ConfigurationError(f"spacing must be one of {SPACINGS}, got {self.spacing!r}")

    @property
    def name(self):
        return f"{self.spacing}-{'scaled' if self.scaled else 'unscaled'}"

    @classmethod
    def from_name(cls, name):
        """Parse ``linear-unscaled``, ``linear-scaled``, ``cubic-unscaled`` or ``cubic-scaled``."""
        try:
            spacing, scaling = name.strip().lower().split("-")
        except ValueError:
            raise ConfigurationError(f"unknown strategy {name!r}") from None
        if spacing not in SPACINGS or scaling not in ("scaled", "unscaled"):
            raise ConfigurationError(f"unknown strategy {name!r}")
        return cls(spacing, scaling == "scaled")

    def __str__(self):
        return self.name


STRATEGIES = tuple(ScheduleStrategy(s, sc) for s in SPACINGS for sc in (False, True))
DEFAULT_STRATEGY = ScheduleStrategy("cubic", True)
DEFAULT_T0 = 0.8


@dataclass(frozen=True)
class ScheduleParams:
    """``t_0`` is always given before cubing, so cubic 0.5 freezes layer 0 at 0.125."""

    t_0: float
    alpha: float
    num_layers: int
    strategy: ScheduleStrategy = DEFAULT_STRATEGY

    def __post_init__(self):
        if isinstance(self.strategy, str):
            object.__setattr__(self, "strategy", ScheduleStrategy.from_name(self.strategy))
        if self.num_layers < 1:
            raise ConfigurationError(f"num_layers must be >= 1, got {self.num_layers}")
        if not self.alpha > 0:
            raise ConfigurationError(f"alpha must be positive, got {self.alpha}")
        if not 0.0 <= self.t_0 <= 1.0:
            raise ConfigurationError(f"t_0 must lie in (0, 1], got {self.t_0}")
        if self.t_0 == 0.0:
            if self.strategy.scaled:
                raise ConfigurationError("t_0 = 0 divides by zero under a scaled strategy")
            warnings.warn("t_0 = 0: the first layer never trains", stacklevel=3)


@dataclass(frozen=True)
class LayerSchedule:
    t_i: float
    alpha_0: float


def _cube(t):
    # cube the shortest decimal form so a user's 0.8 gives 0.512, not 0.5120000000000001
    with localcontext() as ctx:
        ctx.prec = 64
        return float(Decimal(repr(t)) ** 3)


def compute_t_schedule(params):
    """Normalized freeze times, non-decreasing and ending at exactly 1.0."""
    n = params.num_layers
    if n < 1:
        raise ConfigurationError("num_layers must be >= 1")
    if n == 1:
        ts = [1.0]
    else:
        t0 = params.t_0
        ts = [t0 + i * (1.0 - t0) / (n - 1) for i in range(n - 1)] + [1.0]
    if params.strategy.spacing == "cubic":
        ts = [_cube(t) for t in ts]
    return ts


def initial_lrs(params, t_schedule):
    if not params.strategy.scaled:
        return [params.alpha] * len(t_schedule)
    if any(t <= 0 for t in t_schedule):
        raise ConfigurationError("scaled strategy needs every t_i > 0")
    return [params.alpha / t for t in t_schedule]


def layer_schedules(params):
    ts = compute_t_schedule(params)
    return [LayerSchedule(t, a) for t, a in zip(ts, initial_lrs(params, ts))]


def lr_at(sched, t):
    """Cosine-annealed rate at normalized time ``t``; 0 from ``t_i`` on."""
    if t >= sched.t_i:
        return 0.0
    return 0.5 * sched.alpha_0 * (1.0 + math.cos(math.pi * t / sched.t_i))


def is_frozen(sched, t):
    return t >= sched.t_i


def cosine_lr(alpha, t):
    """Plain cosine annealing over the whole run, shared by every layer."""
    return 0.5 * alpha * (1.0 + math.cos(math.pi * t))


def freeze_iteration(t_i, n_itr):
    """First iteration ``k`` whose time ``k / n_itr`` reaches ``t_i``.

    Uses the same float comparison as ``is_frozen`` so the two never disagree.
    """
    k = max(0, math.ceil(t_i * n_itr))
    while k > 0 and (k - 1) / n_itr >= t_i:
        k -= 1
    while k / n_itr < t_i:
        k += 1
    return k


def dump_schedule(params, n_itr):
    """Rows ``(iteration, t, layer_index, lr, frozen)`` for every iteration and layer."""
    if n_itr < 1:
        raise ConfigurationError("n_itr must be >= 1")
    scheds = layer_schedules(params)
    rows = []
    for k in range(n_itr):
        t = k / n_itr
        for i, s in enumerate(scheds):
            rows.append((k, t, i, lr_at(s, t), is_frozen(s, t)))
    return rows


def write_schedule_csv(rows, fh=None):
    """Write ``dump_schedule`` rows as CSV; returns the text when ``fh`` is None."""
    out = io.StringIO() if fh is None else fh
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["iteration", "t", "layer_index", "lr", "frozen"])
    for k, t, i, lr, frozen in rows:
        w.writerow([k, repr(t), i, f"{lr:.9g}", int(frozen)])
    return out.getvalue() if fh is None else None
