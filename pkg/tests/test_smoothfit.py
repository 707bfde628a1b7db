import math

import numpy as np
import pytest
from scipy.optimize import brentq

from onesided import levy, smoothfit, solver
from onesided.errors import PreconditionError
from onesided.reward import ExpCall, LogisticExponential, PiecewiseLogLinear, PowerPlus, TaperedExponential
from onesided.stochastic import JumpDistribution, LatticeLaw

POISSON = levy.LevyModel.poisson_minus_drift(0.5)
LAM = brentq(lambda x: 0.5 * math.expm1(x) - x, 0.5, 5.0, xtol=1e-15)


def test_richardson_removes_linear_and_quadratic_bias():
    eps = np.array([0.2, 0.1, 0.05, 0.025])
    vals = 1.0 + 0.7 * eps - 0.3 * eps ** 2
    est, se, resid = smoothfit.richardson(vals, np.zeros(4))
    assert est == pytest.approx(1.0, abs=1e-12)
    assert se == 0.0 and resid < 1e-12


def test_overshoot_ess_sup_examples():
    assert smoothfit.overshoot_ess_sup(POISSON).zeta == 1.0
    uni = smoothfit.overshoot_ess_sup(levy.LevyModel(-1.0, 0.0, 0.5, JumpDistribution.uniform(0.0, 2.0)),
                                      budget=1 << 16)
    assert uni.zeta == 2.0 and uni.analytic
    assert 1.9 < uni.observed_max <= 2.0
    assert smoothfit.overshoot_ess_sup(levy.LevyModel(-1.0, 0.0, 0.5, JumpDistribution.exponential(1.0))).zeta \
        == math.inf


def test_overshoot_requires_irregular():
    with pytest.raises(PreconditionError):
        smoothfit.overshoot_ess_sup(levy.LevyModel.brownian(-1.0))
    with pytest.raises(PreconditionError):
        smoothfit.overshoot_derivative_formula(levy.LevyModel.brownian(-1.0), PowerPlus(1), 0.1, 1.0)


def test_criterion_a1_holds_with_closed_form():
    r = smoothfit.check_criterion_a1(TaperedExponential(LAM), 0.0, 1.0)
    assert r.status == smoothfit.HOLDS
    for x in (-0.25, -1.0):
        assert r.closed_form(x) == pytest.approx(math.exp(LAM * x), rel=1e-12)
    assert r.closed_form(0.5) == pytest.approx(math.exp(LAM * 0.5), rel=1e-12)


def test_criterion_a1_fails_for_strictly_concave():
    r = smoothfit.check_criterion_a1(TaperedExponential(LAM, 0.1), 0.0, 1.0)
    assert r.status == smoothfit.FAILS and r.gap == pytest.approx(0.2, rel=1e-9)


def test_criterion_a1_infinite_zeta_uses_beta():
    f = LogisticExponential(1.0)
    r = smoothfit.check_criterion_a1(f, 0.0, math.inf)
    assert r.slope_left_at_end == f.beta
    assert r.status == smoothfit.FAILS


def test_criterion_a1_borderline_band():
    f = PiecewiseLogLinear([1.0], [1.0, 1.0 - 1e-7])
    assert smoothfit.check_criterion_a1(f, 0.0, 2.0).status == smoothfit.BORDERLINE


def test_left_derivative_rejects_never_stop():
    walk = LatticeLaw(1.0, [[-1, 0.5], [1, 0.5]])
    sol = solver.find_threshold(walk, PowerPlus(1), 0.0)
    assert sol.regime == solver.NEVER_STOP
    with pytest.raises(PreconditionError):
        smoothfit.left_derivative_of_value(walk, PowerPlus(1), 0.0, sol)


def test_left_derivative_on_lattice_is_exact_difference():
    # exact lattice values carry no Monte Carlo error
    walk = LatticeLaw(0.025, [[-40, 0.75], [40, 0.25]])
    d = smoothfit.left_derivative_of_value(walk, PowerPlus(1), 0.0, 1.0)
    assert d.se == 0.0
    assert [row[0] for row in d.table] == list(smoothfit.DEFAULT_STEPS)


@pytest.mark.slow
def test_regular_smooth_fit_holds_for_exp_call():
    # perpetual call: V = A e^{gamma x} below u with gamma = sqrt(2q); u = log(gamma / (gamma - 1))
    q = 1.0
    gamma = math.sqrt(2 * q)
    u_true = math.log(gamma / (gamma - 1))
    rep = smoothfit.analyze(levy.LevyModel.brownian(), ExpCall(1.0), q, seed=1)
    assert rep.regularity == levy.REGULAR
    assert abs(rep.u - u_true) < 0.01
    assert rep.verdict == smoothfit.SMOOTH_FIT_HOLDS
    assert rep.v_prime_left == pytest.approx(gamma * (math.exp(rep.u_eval) - 1), abs=5e-3)


@pytest.mark.slow
def test_regular_smooth_fit_fails_at_kink():
    from onesided.acceptance import kink_reward
    est = smoothfit.ThresholdEstimate(0.0, -0.01, 0.01)
    rep = smoothfit.analyze(levy.LevyModel.brownian(), kink_reward(), 0.5, est, seed=4)
    assert rep.u_eval == 0.0 and rep.g_prime_right == 0.0
    assert rep.v_prime_left == pytest.approx(1.0, abs=0.05)
    assert rep.verdict == smoothfit.SMOOTH_FIT_FAILS


@pytest.mark.slow
def test_irregular_estimators_agree_when_smooth_fit_fails():
    f = TaperedExponential(LAM, 0.1)
    sol = levy.continuous_threshold(POISSON, f, 0.0, tol=1e-3, seed=7)
    rep = smoothfit.analyze(POISSON, f, 0.0, sol, seed=7)
    assert rep.criterion_a1 == smoothfit.FAILS and rep.verdict == smoothfit.SMOOTH_FIT_FAILS
    assert abs(rep.v_prime_left - rep.overshoot_formula) <= rep.v_prime_left_error + 4 * rep.overshoot_formula_error
    assert rep.v_prime_left < rep.g_prime_right - rep.v_prime_left_error


@pytest.mark.slow
@pytest.mark.parametrize("span,expected", [(0.5, smoothfit.FAILS), (1.0, smoothfit.HOLDS), (1.5, smoothfit.HOLDS)])
def test_verdict_tracks_criterion_a1(span, expected):
    # slope LAM on [0, span], steeper before and flatter after; zeta = 1
    f = PiecewiseLogLinear([0.0, span], [2 * LAM, LAM, 0.3 * LAM], x0=-5.0)
    rep = smoothfit.analyze(POISSON, f, 0.0, seed=2)
    assert rep.criterion_a1 == expected
    holds = rep.verdict == smoothfit.SMOOTH_FIT_HOLDS
    assert holds == (expected == smoothfit.HOLDS)
    gap = rep.g_prime_right - rep.v_prime_left
    if holds:
        assert abs(gap) <= rep.v_prime_left_error + 1e-6
    else:
        assert gap > rep.v_prime_left_error
