"""Progressive layer freezing (FreezeOut) on a small numpy training engine."""

from .autodiff import Network, backward_from, forward, gradient_check, softmax_cross_entropy
from .cost_model import (CostProfile, SpeedupEstimate, baseline_cost, estimate_speedup,
                         freezeout_cost, measured_backward_savings)
from .data import Dataset, gen_toy_images, gen_two_spirals, load_csv
from .errors import ConfigurationError, NumericalError, UndefinedSpeedupError
from .layers import Block, ModelSpec, build, layer_flops
from .schedule import (LayerSchedule, ScheduleParams, ScheduleStrategy, compute_t_schedule,
                       dump_schedule, initial_lrs, is_frozen, lr_at)
from .training import (MetricsRecord, OptimizerState, TrainConfig, evaluate, nesterov_step,
                       train)

__version__ = "0.1.0"
