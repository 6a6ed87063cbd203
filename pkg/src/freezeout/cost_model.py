"""Back-of-the-envelope training compute for FreezeOut.

Forward through layer ``i`` costs ``c_i`` and its backward costs another
``c_i``. Without freezing, ``n_itr`` iterations cost ``sum(2 c_i n_itr)``.
With freezing, layer ``i`` only takes backward passes for the first ``t_i``
fraction of the run, so it costs ``(1 + t_i) c_i n_itr``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigurationError, UndefinedSpeedupError
from .schedule import freeze_iteration

# empirical: the raw estimate undershoots measured speedups for linear spacing
LINEAR_CORRECTION = 1.3
CUBIC_CORRECTION = 1.0


@dataclass(frozen=True)
class CostProfile:
    c: tuple
    n_itr: int = 1

    def __post_init__(self):
        object.__setattr__(self, "c", tuple(self.c))
        if any(ci < 0 for ci in self.c):
            raise ConfigurationError("layer costs must be non-negative")
        if self.n_itr < 1:
            raise ConfigurationError("n_itr must be >= 1")


@dataclass(frozen=True)
class SpeedupEstimate:
    baseline_cost: float
    freezeout_cost: float
    raw_speedup: float
    corrected_speedup: float
    correction_factor: float

    def as_dict(self):
        return {"baseline_cost": self.baseline_cost,
                "freezeout_cost": self.freezeout_cost,
                "raw_speedup": self.raw_speedup,
                "corrected_speedup": self.corrected_speedup,
                "correction_factor": self.correction_factor}


def baseline_cost(profile):
    return math.fsum(2 * ci * profile.n_itr for ci in profile.c)


def freezeout_cost(profile, t):
    t = list(t)
    if len(t) != len(profile.c):
        raise ConfigurationError(f"{len(t)} freeze times for {len(profile.c)} layers")
    if any(not 0.0 <= ti <= 1.0 for ti in t):
        raise ConfigurationError("freeze times must lie in [0, 1]")
    return math.fsum((1 + ti) * ci * profile.n_itr for ti, ci in zip(t, profile.c))


def layer_contributions(profile, t):
    return [(1 + ti) * ci * profile.n_itr for ti, ci in zip(t, profile.c)]


def correction_for(spacing, linear_correction=LINEAR_CORRECTION):
    if spacing == "linear":
        return linear_correction
    if spacing == "cubic":
        return CUBIC_CORRECTION
    raise ConfigurationError(f"unknown spacing {spacing!r}")


def estimate_speedup(profile, t, spacing, linear_correction=LINEAR_CORRECTION):
    base = baseline_cost(profile)
    if base == 0:
        raise UndefinedSpeedupError("baseline cost is zero; speedup undefined")
    fo = freezeout_cost(profile, t)
    raw = 1.0 - fo / base
    factor = correction_for(spacing, linear_correction)
    corrected = min(max(raw * factor, 0.0), math.nextafter(1.0, 0.0))
    return SpeedupEstimate(base, fo, raw, corrected, factor)


def quantized_freeze_times(t, n_itr):
    """Fraction of iterations each layer actually trains: ``ceil(t_i n) / n``."""
    return [freeze_iteration(ti, n_itr) / n_itr for ti in t]


def measured_backward_savings(records):
    """Compute saving from run counters, not wall clock.

    ``records`` is a run's metrics log (dicts or ``MetricsRecord``); the last
    row carrying cumulative MAC counters is used. Returns
    ``1 - (forward + backward) / (2 * forward)``: forward always visits every
    layer, so twice the forward total is the no-freeze fwd+bwd cost.
    """
    last = None
    for r in records:
        row = r if isinstance(r, dict) else vars(r)
        if "forward_macs" in row and "backward_macs" in row:
            last = row
    if last is None:
        raise ConfigurationError("metrics carry no forward/backward MAC counters")
    fwd, bwd = last["forward_macs"], last["backward_macs"]
    if fwd == 0:
        raise UndefinedSpeedupError("no forward MACs recorded")
    return 1.0 - (fwd + bwd) / (2 * fwd)
