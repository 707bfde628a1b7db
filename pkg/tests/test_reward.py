import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from onesided.errors import InvalidReward, InvalidTruncation
from onesided.reward import (ExpCall, ExpLinear, ExpPut, Indicator, LogisticExponential, PiecewiseLogLinear,
                             PowerPlus, Scaled, TaperedExponential, Truncated, reward_from_dict, truncate_above)


def test_eval_examples():
    assert PowerPlus(1).eval(2.0) == 2.0
    assert ExpCall(1).eval(0.0) == 0.0
    assert Indicator(0).eval(-0.5) == 0.0
    assert Indicator(0).eval(0.0) == 1.0  # right-continuous


def test_log_derivative_examples():
    assert PowerPlus(2).log_deriv_left(4.0) == pytest.approx(0.5, rel=1e-12)
    assert Indicator(0).log_deriv_left(-1.0) == math.inf
    f = ExpLinear(1.0)
    for x in (-3.0, 0.0, 7.5):
        assert f.log_deriv_left(x) == f.log_deriv_right(x) == 1.0


def test_beta():
    assert PowerPlus(1.5).beta == 0.0
    assert ExpCall(1).beta == 1.0
    assert ExpCall(1).log_deriv_left(50.0) == pytest.approx(1.0, abs=1e-12)
    assert ExpLinear(0.7).beta == 0.7


def test_x0():
    assert PowerPlus(1).x0 == 0.0
    assert ExpCall(1).x0 == pytest.approx(0.0)
    assert ExpCall(math.e).x0 == pytest.approx(1.0)
    assert ExpLinear(1.0).x0 == -math.inf


def test_truncation_examples():
    f = truncate_above(PowerPlus(1), 3.0)
    assert f.eval(5.0) == pytest.approx(3.0, rel=1e-15)
    assert f.eval(2.0) == pytest.approx(2.0, rel=1e-15)
    assert f.beta == 0.0
    with pytest.raises(InvalidTruncation):
        truncate_above(Indicator(0), -1.0)


def test_invalid_rewards():
    with pytest.raises(InvalidReward):
        PiecewiseLogLinear([0.0], [0.5, 1.0])  # convex log
    with pytest.raises(InvalidReward):
        PiecewiseLogLinear([], [0.0])  # constant
    with pytest.raises(InvalidReward):
        ExpLinear(0.0)
    with pytest.raises(InvalidReward, match="logconcave"):
        reward_from_dict({"kind": "PowerPlus", "nu": 1, "increasing": False})


def test_exp_put_monotone():
    f = ExpPut(1.0)
    xs = np.linspace(f.x0 + 1e-3 if math.isfinite(f.x0) else -5, 5, 200)
    v = f.eval(xs)
    assert np.all(np.diff(v) >= -1e-12)


def test_tapered_exponential_shape():
    lam = 1.3
    f = TaperedExponential(lam)
    # slope lam on (0, 1], tangent continuation above, strictly concave below 0
    assert f.log_deriv_right(0.0) == pytest.approx(lam)
    assert f.log_deriv_left(1.0) == pytest.approx(lam)
    assert f.log_deriv_left(-0.5) > lam
    assert f.log_deriv_right(1.0) <= lam
    assert f.beta == 0.0


@pytest.mark.parametrize("f", [PowerPlus(1), PowerPlus(2.5), ExpCall(1), ExpLinear(0.7), Indicator(0),
                               PiecewiseLogLinear([-1.0, 2.0], [2.0, 1.0, 0.25]), LogisticExponential(1.0),
                               TaperedExponential(1.25, 0.1), Truncated(ExpLinear(1.5), 1.0),
                               Scaled(PowerPlus(1), 3.0)])
def test_json_round_trip(f):
    g = reward_from_dict(f.to_dict())
    xs = np.linspace(-4, 6, 41)
    np.testing.assert_allclose(g.eval(xs), f.eval(xs), rtol=1e-14)
    assert g.beta == f.beta


REWARDS = [PowerPlus(1), PowerPlus(0.5), ExpCall(2.0), ExpLinear(0.7), LogisticExponential(1.0),
           TaperedExponential(1.2, 0.3), PiecewiseLogLinear([-1.0, 0.5, 2.0], [3.0, 1.0, 0.5, 0.1], x0=-2.5)]
xs_strategy = st.floats(-8, 8, allow_nan=False)


@given(i=st.integers(0, len(REWARDS) - 1), a=xs_strategy, b=xs_strategy)
def test_monotone(i, a, b):
    f = REWARDS[i]
    lo, hi = min(a, b), max(a, b)
    assert f.eval(lo) <= f.eval(hi) * (1 + 1e-12)


@given(i=st.integers(0, len(REWARDS) - 1), a=xs_strategy, b=xs_strategy, t=st.floats(0, 1))
def test_log_concave(i, a, b, t):
    f = REWARDS[i]
    ha, hb = f.h(a), f.h(b)
    hm = f.h(t * a + (1 - t) * b)
    if math.isinf(ha) or math.isinf(hb):
        return
    assert hm >= t * ha + (1 - t) * hb - 1e-9 * (1 + abs(ha) + abs(hb))


@given(i=st.integers(0, len(REWARDS) - 1), a=xs_strategy, b=xs_strategy)
def test_log_derivative_nonincreasing(i, a, b):
    f = REWARDS[i]
    lo, hi = min(a, b), max(a, b)
    if f.eval(lo) <= 0:
        return
    assert f.log_deriv_left(lo) >= f.log_deriv_right(lo) - 1e-9
    assert f.log_deriv_right(lo) >= f.log_deriv_left(hi) - 1e-9 or lo == hi


@given(i=st.integers(0, len(REWARDS) - 1), b=st.floats(-2, 6), x=xs_strategy)
def test_truncation_identity(i, b, x):
    f = REWARDS[i]
    if not b > f.x0:
        return
    t = truncate_above(f, b)
    assert t.eval(x) == pytest.approx(f.eval(min(x, b)), rel=1e-12)
    assert t.beta == 0.0


@given(i=st.integers(0, len(REWARDS) - 1), c=st.floats(0.01, 100), x=xs_strategy)
def test_scaling_shifts_h(i, c, x):
    f = REWARDS[i]
    s = Scaled(f, c)
    if f.eval(x) > 0:
        assert s.h(x) == pytest.approx(f.h(x) + math.log(c), abs=1e-9)
        assert s.log_deriv_left(x) == pytest.approx(f.log_deriv_left(x))
