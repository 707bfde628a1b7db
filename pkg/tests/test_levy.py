import math

import numpy as np
import pytest
from scipy.optimize import brentq

from onesided import levy, solver
from onesided.errors import InvalidLaw, MonotonicityViolated, PreconditionError
from onesided.reward import Indicator, PowerPlus, TaperedExponential
from onesided.stochastic import JumpDistribution, mgf_root


def test_step_law_gaussian_scaling():
    law = levy.step_law(levy.LevyModel.brownian(0.4, 1.0), 2.0 ** -4)
    assert law.mean == pytest.approx(0.4 / 16)
    lam = 1.3
    assert law.log_mgf(lam) == pytest.approx((0.4 * lam + lam * lam / 2) / 16, rel=1e-14)
    x = law.sample(np.random.default_rng(0), 200_000)
    assert abs(x.mean() - 0.025) < 4 * 0.25 / math.sqrt(x.size)
    assert x.var() == pytest.approx(1 / 16, rel=0.02)


def test_step_law_poisson_minus_drift():
    model = levy.LevyModel.poisson_minus_drift(0.5)
    law = levy.step_law(model, 1.0)
    for lam in (0.0, 0.5, 1.0, 2.0):
        assert law.log_mgf(lam) == pytest.approx(0.5 * math.expm1(lam) - lam, abs=1e-14)
    x = law.sample(np.random.default_rng(1), 100_000)
    # N_1 - 1 takes integer values with Poisson(0.5) weights
    assert np.allclose(x, np.round(x))
    assert np.mean(x == -1.0) == pytest.approx(math.exp(-0.5), abs=0.005)


def test_step_law_compound_mgf():
    jumps = JumpDistribution.uniform(-1.0, 0.5)
    model = levy.LevyModel(0.1, 0.4, 0.5, jumps)
    law = levy.step_law(model, 0.25)
    lam = 0.8
    ej = (math.exp(0.5 * lam) - math.exp(-lam)) / (1.5 * lam)
    psi = 0.1 * lam + 0.16 * lam * lam / 2 + 0.5 * (ej - 1)
    assert law.log_mgf(lam) == pytest.approx(0.25 * psi, rel=1e-12)


def test_regularity_of_zero():
    assert levy.regularity_of_zero(levy.LevyModel.brownian(-2.0, 0.3)) == levy.REGULAR
    assert levy.regularity_of_zero(levy.LevyModel.poisson_minus_drift(0.5)) == levy.IRREGULAR
    assert levy.regularity_of_zero(levy.LevyModel(1.0, 0.0, 1.0, JumpDistribution.degenerate(-1.0))) == levy.REGULAR


def test_infinite_activity_rejected():
    with pytest.raises(InvalidLaw, match="infinite-activity"):
        levy.model_from_dict({"drift": 0.0, "sigma": 1.0, "infinite_activity": True})


def test_model_json_round_trip():
    m = levy.LevyModel(-0.5, 0.5, 1.0, JumpDistribution.exponential(0.3))
    assert levy.model_from_dict(m.to_dict()) == m


def test_geometric_extrapolation():
    us = [1 - 0.5 ** k for k in range(1, 6)]
    lim, _ = levy.geometric_extrapolation(us)
    assert lim == pytest.approx(1.0, abs=1e-12)


def test_check_monotone_negative_control():
    ok = [levy.LevelResult(0, solver.FINITE, -0.3, 1e-3, 0.01, 1), levy.LevelResult(1, solver.FINITE, -0.2, 1e-3, 0.01, 1)]
    levy.check_monotone(ok)
    bad = ok + [levy.LevelResult(2, solver.FINITE, -0.5, 1e-3, 0.01, 1)]
    with pytest.raises(MonotonicityViolated):
        levy.check_monotone(bad)


def test_threshold_sequence_needs_levels():
    with pytest.raises(PreconditionError):
        levy.threshold_sequence(levy.LevyModel.brownian(), Indicator(0), 0.5, 1)


@pytest.mark.slow
def test_brownian_indicator_sequence():
    seq = levy.threshold_sequence(levy.LevyModel.brownian(), Indicator(0), 0.5, 6, per_level_budget=1 << 15, seed=2)
    us = [r.u for r in seq.levels]
    assert all(r.regime == solver.FINITE for r in seq.levels)
    assert max(us) <= 1e-9
    assert abs(seq.extrapolated) <= 0.02 or abs(seq.raw_last) <= 0.02
    levy.check_monotone(seq.levels)


@pytest.mark.slow
def test_positive_drift_never_stops():
    seq = levy.threshold_sequence(levy.LevyModel.brownian(1.0, 1.0), PowerPlus(1), 0.0, 3, per_level_budget=1 << 13)
    assert all(r.regime == solver.NEVER_STOP for r in seq.levels)
    assert seq.extrapolated == math.inf


@pytest.mark.slow
@pytest.mark.parametrize("q", [0.125, 0.5, 2.0])
def test_brownian_indicator_value(q):
    v = levy.value_at_level(levy.LevyModel.brownian(), Indicator(0), q, 10, 0.0, -1.0, budget=50_000, seed=1)
    target = math.exp(-math.sqrt(2 * q))
    assert abs(v.mean - target) <= max(0.01, 4 * v.se)


@pytest.mark.slow
def test_value_at_level_increases_with_level():
    m, f = levy.LevyModel.brownian(), Indicator(0)
    v0 = levy.value_at_level(m, f, 0.5, 0, 0.0, -1.0, budget=50_000, seed=3)
    v6 = levy.value_at_level(m, f, 0.5, 6, 0.0, -1.0, budget=50_000, seed=4)
    assert v6.mean > v0.mean + 3 * math.hypot(v0.se, v6.se)
    for v in (v0, v6):
        assert v.mean <= math.exp(-1) + 3 * v.se
    assert levy.value_at_level(m, f, 0.5, 6, 0.0, 0.3).mean == 1.0


@pytest.mark.slow
def test_poisson_drift_exponential_value():
    model = levy.LevyModel.poisson_minus_drift(0.5)
    lam = brentq(lambda x: 0.5 * math.expm1(x) - x, 0.5, 5.0, xtol=1e-15)
    assert mgf_root(model.time1_law, 0.0) == pytest.approx(lam, abs=1e-9)
    f = TaperedExponential(lam)
    for x in (-0.25, -0.5, -1.0):
        v = levy.continuous_value(model, f, 0.0, 0.0, x, budget=100_000, seed=int(-4 * x))
        assert abs(v.mean - math.exp(lam * x)) <= 4 * v.se + 1e-12
