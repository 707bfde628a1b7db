import math

import numpy as np
import pytest
from conftest import walk

from onesided import oracle, solver
from onesided.errors import GridTooNarrow
from onesided.reward import ExpLinear, Indicator, PowerPlus


def test_value_iteration_expected_maximum():
    dp = oracle.value_iteration(walk(0.25), PowerPlus(1), 0.0, [-40, 40])
    assert dp.converged
    assert float(dp.values[dp.grid == 0][0]) == pytest.approx(1 / 3, abs=1e-6)
    s = dp.stopping_set
    assert s.min() == 1.0 and np.all(np.diff(s) == 1.0) and s.max() == 40.0
    assert np.all(dp.values >= dp.rewards - 1e-15)


def test_value_iteration_indicator():
    dp = oracle.value_iteration(walk(0.5), Indicator(0), 0.2, [-30, 30])
    assert dp.stopping_set.min() == 0.0
    assert oracle.check_one_sided(dp) == {"is_up_set": True, "dp_threshold": 0.0}


def test_value_iteration_huge_discount():
    dp = oracle.value_iteration(walk(0.25), PowerPlus(1), 10.0, [-20, 20])
    pos = dp.rewards > 0
    np.testing.assert_array_equal(dp.stopping[pos], True)
    np.testing.assert_allclose(dp.values[pos], dp.rewards[pos])


def test_check_one_sided_examples():
    dp = oracle.value_iteration(walk(0.25), PowerPlus(1), 0.0, [-40, 40])
    assert oracle.check_one_sided(dp) == {"is_up_set": True, "dp_threshold": 1.0}
    # negative control: open a hole in the stopping region
    bad = oracle.DpResult(**{**dp.__dict__})
    bad.values = dp.values.copy()
    bad.values[dp.grid == 5] += 1.0
    assert oracle.check_one_sided(bad)["is_up_set"] is False


def test_check_one_sided_stop_everywhere():
    dp = oracle.value_iteration(walk(0.5), ExpLinear(1.0), 0.7, [-20, 20], boundary=oracle.CLAMP,
                                allow_boundary_stop=True, allow_nonnegative_drift=True)
    res = oracle.check_one_sided(dp)
    assert res["is_up_set"] and res["dp_threshold"] == dp.grid.min()


def test_cross_validate_examples():
    law, f = walk(0.25), PowerPlus(1)
    res = solver.solve(law, f, 0.0)
    dp = oracle.value_iteration(law, f, 0.0, [-40, 40])
    cv = oracle.cross_validate(res.solution.u, res.V, dp, 1.0)
    assert cv["pass"]
    assert cv["threshold_gap"] == pytest.approx(0.5, abs=1e-8)
    assert cv["value_gap"] < 1e-6

    q = 0.2
    res = solver.solve(walk(0.5), Indicator(0), q)
    dp = oracle.value_iteration(walk(0.5), Indicator(0), q, [-30, 30])
    cv = oracle.cross_validate(res.solution.u, res.V, dp, 1.0)
    assert cv["pass"] and cv["threshold_gap"] == pytest.approx(0.0, abs=1e-9)


def test_cross_validate_wrong_threshold_fails():
    law, f = walk(0.25), PowerPlus(1)
    dp = oracle.value_iteration(law, f, 0.0, [-40, 40])
    wrong = 2.5

    def v(x):
        return np.array([solver.value_with_threshold(law, f, 0.0, wrong, xi)[0] for xi in np.atleast_1d(x)])

    cv = oracle.cross_validate(wrong, v, dp, 1.0)
    assert not cv["pass"]
    assert cv["worst_solver"] < cv["worst_dp"]
    assert cv["worst_x"] < wrong


def test_grid_too_narrow():
    with pytest.raises(GridTooNarrow):
        oracle.value_iteration(walk(0.25), PowerPlus(1), 0.0, [3, 40])


def test_iterates_monotone_and_excessive():
    law, f, q = walk(0.3), PowerPlus(2), 0.05
    dp = oracle.value_iteration(law, f, q, [-40, 40])
    v = dp.values
    interior = (dp.grid > dp.grid.min() + 1) & (dp.grid < dp.grid.max() - 1)
    cont = math.exp(-q) * (0.3 * np.roll(v, -1) + 0.7 * np.roll(v, 1))
    assert np.all(v[interior] >= cont[interior] - 1e-9)


def test_dp_csv_columns():
    dp = oracle.value_iteration(walk(0.25), PowerPlus(1), 0.0, [-40, 40])
    lines = dp.to_csv().splitlines()
    assert lines[0] == "x,g,V,inStoppingSet"
    assert len(lines) == dp.grid.size + 1


def test_boundary_sensitivity_small():
    rep = oracle.boundary_sensitivity(walk(0.25), PowerPlus(1), 0.0, [-40, 40])
    assert rep["max_change"] < 1e-6
