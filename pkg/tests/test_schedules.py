import math

import numpy as np
import pytest

from asyncmb.schedules import (CONSTANT, STRONGLY_CONVEX, TIME_VARYING,
                               ConfigurationError, Schedule, ScheduleParams,
                               bound_constant_step, bound_strongly_convex,
                               bound_time_varying, epsilon_targeted_gamma,
                               gamma_at, gamma_ceiling, horizon_gamma,
                               iteration_complexity)


def test_gamma_at_time_varying_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=1.0, c=1.0, b=1, R=1.0)
    s = Schedule(TIME_VARYING, p)
    assert gamma_at(s, 0) == pytest.approx(0.5)


def test_gamma_at_strongly_convex_substitution():
    p = ScheduleParams(L=1.0, tau_max=1, mu_psi=3.0, Q=1.0)
    s = Schedule(STRONGLY_CONVEX, p)
    assert gamma_at(s, 0) == pytest.approx(0.1)


def test_gamma_at_constant():
    p = ScheduleParams(L=1.0, tau_max=0)
    s = Schedule(CONSTANT, p, gamma=0.1)
    for k in (0, 1, 17, 10 ** 6):
        assert gamma_at(s, k) == 0.1


def test_gamma_at_negative_k_rejected():
    s = Schedule(CONSTANT, ScheduleParams(L=1.0), gamma=0.1)
    with pytest.raises(ValueError):
        gamma_at(s, -1)


def test_epsilon_targeted_gamma_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=1.0, c=1.0, b=1, epsilon=0.1)
    assert epsilon_targeted_gamma(p) == pytest.approx(1.0 / 11.0)


def test_epsilon_targeted_gamma_sigma_zero_capped():
    p = ScheduleParams(L=2.0, tau_max=1, sigma=0.0, epsilon=0.1)
    g = epsilon_targeted_gamma(p)
    assert g == pytest.approx(0.999 * gamma_ceiling(p))
    assert 0 < g < gamma_ceiling(p)


def test_epsilon_targeted_gamma_vanishes_with_epsilon():
    gs = [epsilon_targeted_gamma(
        ScheduleParams(L=1.0, sigma=1.0, epsilon=e)) for e in (1e-2, 1e-4, 1e-6)]
    assert gs[0] > gs[1] > gs[2]
    assert gs[2] < 1e-5


def test_horizon_gamma_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=1.0, c=1.0, b=1, D0=0.5, T_F=100)
    assert horizon_gamma(p) == pytest.approx(1.0 / 11.0)


def test_horizon_gamma_sigma_zero_and_missing_d0():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=0.0, D0=0.5, T_F=100)
    assert horizon_gamma(p) == pytest.approx(0.999)
    with pytest.raises(ConfigurationError):
        horizon_gamma(ScheduleParams(L=1.0, sigma=1.0, T_F=100))


def test_iteration_complexity_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=1.0, c=1.0, b=1,
                       epsilon=0.1, D0=1.0)
    assert iteration_complexity(p) == 220


def test_iteration_complexity_deterministic_case():
    p = ScheduleParams(L=3.0, tau_max=0, sigma=0.0, epsilon=0.07, D0=1.3)
    assert iteration_complexity(p) == math.ceil(2 * 1.3 * 3.0 / 0.07)


def test_iteration_complexity_batch_scaling():
    def t(b):
        return iteration_complexity(ScheduleParams(
            L=1.0, sigma=2.0, c=1.0, b=b, epsilon=0.01, D0=1.0))
    # the noise term dominates here; doubling b should nearly halve it
    first_term = 2 * 1.0 / 0.01
    assert t(2) - first_term == pytest.approx((t(1) - first_term) / 2, rel=1e-6)


def test_bound_constant_step_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=1.0, c=1.0, b=1, D0=1.0)
    val = bound_constant_step(p, gamma=0.1, T=100)
    assert val == pytest.approx(1.0 / (0.1 * 100) + 0.1 / (2 * 0.9))
    assert val == pytest.approx(0.15555555, abs=1e-6)


def test_bound_time_varying_sigma_zero():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=0.0, R=1.0)
    for T in (10, 1000):
        assert bound_time_varying(p, T) == pytest.approx(1.0 / T)


def test_bound_strongly_convex_substitution():
    p = ScheduleParams(L=1.0, tau_max=0, sigma=0.0, mu_psi=1.0, Q=1.0, D0=0.7)
    assert bound_strongly_convex(p, 9) == pytest.approx(98 * 0.7 / 100)


def test_bound_argument_errors():
    p = ScheduleParams(L=1.0, sigma=1.0)
    with pytest.raises(ConfigurationError):
        bound_constant_step(p, 0.1, 10)  # D0 missing
    with pytest.raises(ConfigurationError):
        bound_constant_step(ScheduleParams(L=1.0, D0=1.0), 1.5, 10)
    with pytest.raises(ConfigurationError):
        bound_time_varying(ScheduleParams(L=1.0), 10)
    with pytest.raises(ConfigurationError):
        bound_strongly_convex(ScheduleParams(L=1.0, D0=1.0), 10)


def _random_params(rng, need_R=False, need_mu=False):
    return ScheduleParams(
        L=float(np.exp(rng.uniform(-2, 3))),
        tau_max=int(rng.integers(0, 8)),
        sigma=float(np.exp(rng.uniform(-3, 2))),
        c=float(rng.uniform(1.0, 3.0)),
        b=int(rng.integers(1, 64)),
        R=float(np.exp(rng.uniform(-1, 2))) if need_R else None,
        mu_psi=float(np.exp(rng.uniform(-2, 2))) if need_mu else 0.0,
        Q=float(rng.uniform(1.0, 5.0)))


@pytest.mark.parametrize("kind", [TIME_VARYING, STRONGLY_CONVEX])
def test_gamma_nonincreasing(kind):
    rng = np.random.default_rng(67)
    ks = np.unique(np.concatenate([
        np.arange(0, 100), np.logspace(2, 6, 200).astype(int)]))
    for _ in range(50):
        p = _random_params(rng, need_R=kind == TIME_VARYING,
                           need_mu=kind == STRONGLY_CONVEX)
        s = Schedule(kind, p)
        gs = np.array([gamma_at(s, int(k)) for k in ks])
        assert np.all(gs > 0)
        assert np.all(np.diff(gs) <= 0)


def test_strongly_convex_ratio_identity():
    # 1/gamma(k+1)^2 <= (1/gamma(k)) (1/gamma(k) + mu_psi/Q), exact to 1e-12
    rng = np.random.default_rng(71)
    for _ in range(10_000):
        p = _random_params(rng, need_mu=True)
        s = Schedule(STRONGLY_CONVEX, p)
        k = int(rng.integers(0, 10 ** 6))
        a = 1.0 / gamma_at(s, k)
        a_next = 1.0 / gamma_at(s, k + 1)
        assert a_next ** 2 <= a * (a + p.mu_psi / p.Q) * (1 + 1e-12)


def test_derived_constants_always_admissible():
    rng = np.random.default_rng(73)
    for _ in range(2000):
        p = _random_params(rng)
        p.epsilon = float(np.exp(rng.uniform(-6, 0)))
        p.D0 = float(np.exp(rng.uniform(-3, 3)))
        p.T_F = int(rng.integers(1, 10 ** 7))
        ceil = gamma_ceiling(p)
        for g in (epsilon_targeted_gamma(p), horizon_gamma(p)):
            assert 0 < g < ceil
            Schedule(CONSTANT, p, gamma=g)  # constructor re-validates


def test_bounds_decrease_with_horizon():
    p = ScheduleParams(L=1.0, tau_max=2, sigma=0.5, c=1.2, b=4, R=1.0,
                       mu_psi=0.8, Q=1.5, D0=2.0)
    for f in (lambda T: bound_time_varying(p, T),
              lambda T: bound_strongly_convex(p, T),
              lambda T: bound_constant_step(p, 0.05, T)):
        vals = [f(T) for T in (10, 100, 1000, 10000)]
        assert all(x > y for x, y in zip(vals, vals[1:]))


def test_schedule_constructor_validation():
    p = ScheduleParams(L=1.0, tau_max=1)
    with pytest.raises(ConfigurationError):
        Schedule(CONSTANT, p, gamma=0.25)  # ceiling is 0.25, interval open
    with pytest.raises(ConfigurationError):
        Schedule(CONSTANT, p)  # no gamma
    with pytest.raises(ConfigurationError):
        Schedule(TIME_VARYING, p)  # no R
    with pytest.raises(ConfigurationError):
        Schedule(STRONGLY_CONVEX, p)  # no mu_psi
    with pytest.raises(ConfigurationError):
        Schedule("polynomial", p, gamma=0.1)


def test_params_validation():
    with pytest.raises(ConfigurationError):
        ScheduleParams(L=0.0)
    with pytest.raises(ConfigurationError):
        ScheduleParams(L=1.0, tau_max=-1)
    with pytest.raises(ConfigurationError):
        ScheduleParams(L=1.0, Q=0.5)
    with pytest.raises(ConfigurationError):
        ScheduleParams(L=1.0, b=0)
