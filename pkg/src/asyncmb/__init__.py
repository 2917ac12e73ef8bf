"""Asynchronous mini-batch composite mirror descent: solver, delay
simulator, threaded runner, and convergence-bound evaluators."""

from .composite import (CesaroAverage, ProblemSpec, Regularizer,
                        cesaro_average, mirror_step, phi_value, psi_value)
from .data_io import (Dataset, gen_lasso, gen_logistic_ball,
                      gen_sparse_logistic, gen_strongly_convex, read_libsvm,
                      write_csv, write_libsvm)
from .engine import (DelayModel, RunReport, replay, run_threaded, simulate)
from .geometry import (DistanceGenerator, NormPair, bregman, dual_norm,
                       grad_omega, variance_constant)
from .oracle import (DataPoint, StochasticOracle, estimate_sigma, loss_grad,
                     lipschitz_bound)
from .schedules import (Schedule, ScheduleParams, bound_constant_step,
                        bound_strongly_convex, bound_time_varying,
                        epsilon_targeted_gamma, gamma_at, horizon_gamma,
                        iteration_complexity)

__version__ = "0.1.0"
