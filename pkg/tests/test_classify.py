import math

import numpy as np
import pytest
from conftest import walk
from hypothesis import given, settings
from hypothesis import strategies as st

from onesided import classify, levy, solver
from onesided.reward import ExpCall, ExpLinear, LogisticExponential, PowerPlus, Scaled
from onesided.stochastic import JumpDistribution, mgf


def test_sufficient_finite_examples():
    r = classify.sufficient_finite(walk(0.25), ExpCall(1.0), 0.0)
    assert r["result"] is True
    # the witness reproduces: E exp((1 + delta) xi) <= 1
    assert mgf(walk(0.25), 1.0 + r["delta"]) == pytest.approx(r["mgf"], rel=1e-12) and r["mgf"] <= 1.0
    assert mgf(walk(0.25), 1.03125) == pytest.approx(0.25 * math.exp(1.03125) + 0.75 * math.exp(-1.03125))
    assert mgf(walk(0.25), 1.03125) < 1.0
    assert classify.sufficient_finite(walk(0.5), PowerPlus(1), 0.0)["result"] is False
    r = classify.sufficient_finite(walk(0.5), PowerPlus(1), 10.0)
    assert r["result"] is True and r["delta"] == 1.0


def test_sufficient_infinite_examples():
    assert classify.sufficient_infinite(walk(0.5), PowerPlus(1), 0.0)["result"] == classify.NOT_APPLICABLE
    assert classify.sufficient_infinite(walk(0.5), PowerPlus(1), 0.1)["result"] is False
    # cosh(0.3) = 1.0453 >= e^0.04 = 1.0408, with a strict slope gap above beta = 0.3
    f = LogisticExponential(0.3)
    r = classify.sufficient_infinite(walk(0.5), f, 0.04)
    assert f.beta == 0.3 and r["result"] is True
    assert r["mgf"] == pytest.approx(math.cosh(0.3), rel=1e-12)


def test_light_tail_examples():
    v = classify.light_tail_characterization(walk(0.25), ExpCall(1.0), 0.0)
    assert v.verdict == classify.FINITE and v.witness["mgf_at_beta"] == pytest.approx(0.95548, abs=1e-5)
    v = classify.light_tail_characterization(walk(0.5), LogisticExponential(1.0), 0.0)
    assert v.verdict == classify.INFINITE
    # Pareto(1.5) jumps: no mgf beyond 0 and E[(xi+)^2] infinite, so no test applies
    heavy = levy.LevyModel(-4.0, 0.0, 1.0, JumpDistribution.pareto(1.5, 1.0)).time1_law
    assert heavy.mean < 0
    assert classify.light_tail_characterization(heavy, PowerPlus(2), 0.1).verdict == classify.INCONCLUSIVE


def test_novikov_shiryaev_examples():
    r = classify.novikov_shiryaev(walk(0.25), 1.0, 0.0)
    assert r["result"] == classify.FINITE and r["mean"] == pytest.approx(-0.5) and r["moment"] == pytest.approx(0.25)
    assert classify.novikov_shiryaev(walk(0.7), 1.0, 0.3)["result"] == classify.FINITE
    assert classify.novikov_shiryaev_condition(walk(0.25), ExpCall(1.0), 0.0)["result"] == classify.NOT_APPLICABLE


def test_boundary_equality_is_infinite():
    # E exp(beta xi) = e^q exactly: the comparison uses >=
    q = math.log(math.cosh(1.0))
    assert classify.sufficient_infinite(walk(0.5), LogisticExponential(1.0), q)["result"] is True


def _random_instance(seed):
    rng = np.random.default_rng(seed)
    p = float(rng.uniform(0.1, 0.6))
    law = walk(p)
    kind = int(rng.integers(0, 3))
    f = [PowerPlus(float(rng.uniform(0.5, 2))), ExpCall(float(rng.uniform(0.5, 2))),
         LogisticExponential(float(rng.uniform(0.2, 1.5)))][kind]
    q = float(rng.choice([0.0, rng.uniform(0, 0.5)]))
    return law, f, q


@settings(max_examples=30)
@given(seed=st.integers(0, 2**32 - 1))
def test_verdict_consistent_with_solver(seed):
    law, f, q = _random_instance(seed)
    v = classify.light_tail_characterization(law, f, q).verdict
    sol = solver.find_threshold(law, f, q)
    if v == classify.FINITE:
        assert sol.regime in (solver.FINITE, solver.STOP_EVERYWHERE)
    elif v == classify.INFINITE:
        assert sol.regime == solver.NEVER_STOP


@given(seed=st.integers(0, 2**32 - 1), c=st.floats(0.01, 100))
def test_verdict_scale_invariant(seed, c):
    law, f, q = _random_instance(seed)
    a = classify.classify(law, f, q)
    b = classify.classify(law, Scaled(f, c), q)
    assert a == b


@given(seed=st.integers(0, 2**32 - 1))
def test_sufficient_finite_excludes_infinite(seed):
    law, f, q = _random_instance(seed)
    if classify.sufficient_finite(law, f, q)["result"]:
        assert classify.light_tail_characterization(law, f, q).verdict != classify.INFINITE


def test_exp_linear_tail_is_not_overclaimed():
    # h affine: the strict slope gap fails, so no MGF verdict is claimed as an equivalence
    v = classify.light_tail_characterization(walk(0.5), ExpLinear(1.0), 0.2)
    assert v.verdict != classify.FINITE
