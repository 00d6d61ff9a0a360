"""Distributed online Frank-Wolfe with gradient tracking over time-varying networks."""

from . import algorithms, io, kernels, losses, metrics, network, sets
from .algorithms import DOFW, DOGD, StepSchedule, alpha_at, dofw_round, dogd_round, run
from .errors import (ConfigError, ConvergenceError, DimensionError, DofwError, NonFiniteError,
                     ScheduleError, UnsupportedSetError)
from .losses import RidgeStream, generate_ridge, lipschitz_constants, static_stream
from .metrics import (comparator_series, consensus_diagnostics, dynamic_regret, per_round_optimum,
                      theorem1_bound, timing_report, variation_DT, variation_HT)
from .network import (MixingSchedule, check_ergodicity_bound, generate_schedule, transition_matrix,
                      verify_assumption1)
from .sets import FeasibleSet, diameter, lmo, project

__version__ = "0.1.0"
