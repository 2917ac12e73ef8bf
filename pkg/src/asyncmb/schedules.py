"""Step-size policies and analytic convergence-bound evaluators.

Three policies are supported:
  * constant gamma in the open interval (0, 1/(L (tau_max+1)^2));
  * the time-varying rule 1/gamma(k) = L (tau_max+1)^2
      + sigma sqrt(c) sqrt(k+1) / (R sqrt(b))   (compact-domain analysis);
  * the strongly convex rule 1/gamma(k) = 2 L (tau_max+1)^2
      + mu_psi (k + tau_max + 1) / (3 Q).

The bound evaluators return the analytic right-hand sides that the
acceptance harness compares against measured suboptimality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

CONSTANT = "constant"
TIME_VARYING = "time_varying"
STRONGLY_CONVEX = "strongly_convex"

# stay strictly inside the open admissibility interval when a formula hits
# its boundary (sigma = 0 limit)
_BOUNDARY_CAP = 0.999


class ConfigurationError(ValueError):
    """Missing or inconsistent schedule parameters."""


@dataclass
class ScheduleParams:
    L: float
    tau_max: int = 0
    sigma: float = 0.0
    c: float = 1.0
    b: int = 1
    R: float | None = None
    mu_psi: float = 0.0
    Q: float = 1.0
    epsilon: float | None = None
    T_F: int | None = None
    D0: float | None = None

    def __post_init__(self):
        if self.L <= 0:
            raise ConfigurationError("L must be positive")
        if self.tau_max < 0:
            raise ConfigurationError("tau_max must be nonnegative")
        if self.sigma < 0:
            raise ConfigurationError("sigma must be nonnegative")
        if self.b < 1:
            raise ConfigurationError("batch size must be >= 1")
        if self.Q < 1.0:
            raise ConfigurationError("Q must be >= 1 (the generator modulus)")


@dataclass
class Schedule:
    kind: str
    params: ScheduleParams
    gamma: float | None = None  # constant schedules only

    def __post_init__(self):
        if self.kind not in (CONSTANT, TIME_VARYING, STRONGLY_CONVEX):
            raise ConfigurationError(f"unknown schedule kind: {self.kind!r}")
        p = self.params
        if self.kind == CONSTANT:
            if self.gamma is None:
                raise ConfigurationError("constant schedule needs gamma")
            if not 0 < self.gamma < gamma_ceiling(p):
                raise ConfigurationError(
                    f"gamma must lie in (0, {gamma_ceiling(p):g})")
        elif self.kind == TIME_VARYING:
            if p.R is None or p.R <= 0:
                raise ConfigurationError("time-varying schedule needs domain radius R")
        else:
            if p.mu_psi <= 0:
                raise ConfigurationError("strongly convex schedule needs mu_psi > 0")


def gamma_ceiling(p: ScheduleParams) -> float:
    """Supremum of admissible constant step-sizes."""
    return 1.0 / (p.L * (p.tau_max + 1) ** 2)


def gamma_at(schedule: Schedule, k: int) -> float:
    if k < 0:
        raise ValueError("k must be nonnegative")
    p = schedule.params
    if schedule.kind == CONSTANT:
        return schedule.gamma
    if schedule.kind == TIME_VARYING:
        alpha = p.sigma * math.sqrt(p.c) * math.sqrt(k + 1) / (p.R * math.sqrt(p.b))
        return 1.0 / (p.L * (p.tau_max + 1) ** 2 + alpha)
    beta = p.mu_psi * (k + p.tau_max + 1) / (3.0 * p.Q)
    return 1.0 / (2.0 * p.L * (p.tau_max + 1) ** 2 + beta)


def epsilon_targeted_gamma(p: ScheduleParams) -> float:
    """Constant step-size targeting a given accuracy epsilon."""
    if p.epsilon is None or p.epsilon <= 0:
        raise ConfigurationError("epsilon must be set and positive")
    gamma = p.epsilon / (p.L * p.epsilon * (p.tau_max + 1) ** 2 + p.c * p.sigma ** 2 / p.b)
    return min(gamma, _BOUNDARY_CAP * gamma_ceiling(p))


def horizon_gamma(p: ScheduleParams) -> float:
    """Constant step-size optimized for a known iteration horizon T_F."""
    if p.T_F is None or p.T_F < 1:
        raise ConfigurationError("T_F must be set and >= 1")
    if p.D0 is None or p.D0 <= 0:
        raise ConfigurationError("D0 must be set and positive")
    alpha_star = p.sigma * math.sqrt(p.c) / math.sqrt(2.0 * p.b * p.D0)
    gamma = 1.0 / (p.L * (p.tau_max + 1) ** 2 + alpha_star * math.sqrt(p.T_F))
    return min(gamma, _BOUNDARY_CAP * gamma_ceiling(p))


def iteration_complexity(p: ScheduleParams) -> int:
    """Iterations needed for epsilon accuracy with the targeted step-size."""
    if p.epsilon is None or p.epsilon <= 0:
        raise ConfigurationError("epsilon must be set and positive")
    if p.D0 is None or p.D0 <= 0:
        raise ConfigurationError("D0 must be set and positive")
    t = 2.0 * p.D0 * (p.L * (p.tau_max + 1) ** 2 / p.epsilon
                      + p.c * p.sigma ** 2 / (p.b * p.epsilon ** 2))
    return max(1, math.ceil(t))


def bound_constant_step(p: ScheduleParams, gamma: float, T: int) -> float:
    """Guaranteed suboptimality of the Cesaro average under a constant step."""
    if p.D0 is None:
        raise ConfigurationError("D0 must be set")
    if not 0 < gamma < gamma_ceiling(p):
        raise ConfigurationError("gamma outside the admissible interval")
    denom = 1.0 - gamma * p.L * (p.tau_max + 1) ** 2
    return p.D0 / (gamma * T) + gamma * p.c * p.sigma ** 2 / (2.0 * p.b * denom)


def bound_time_varying(p: ScheduleParams, T: int) -> float:
    """Guaranteed suboptimality under the time-varying rule (compact domain)."""
    if p.R is None or p.R <= 0:
        raise ConfigurationError("R must be set and positive")
    return (p.L * p.R ** 2 * (p.tau_max + 1) ** 2 / T
            + 2.0 * p.sigma * p.R * math.sqrt(p.c) / math.sqrt(p.b * T))


def bound_strongly_convex(p: ScheduleParams, T: int) -> float:
    """Guaranteed E||x(T) - x*||^2 under the strongly convex rule."""
    if p.mu_psi <= 0:
        raise ConfigurationError("mu_psi must be positive")
    if p.D0 is None:
        raise ConfigurationError("D0 must be set")
    lead = 2.0 * (6.0 * p.L * p.Q / p.mu_psi + 1.0) ** 2 * (p.tau_max + 1) ** 4
    return (lead * p.D0 / (T + 1) ** 2
            + 18.0 * p.c * p.sigma ** 2 * p.Q ** 2 / (p.b * p.mu_psi ** 2 * (T + 1)))
