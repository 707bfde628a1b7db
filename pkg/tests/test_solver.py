import math

import numpy as np
import pytest
from conftest import walk
from hypothesis import given, settings
from hypothesis import strategies as st

from onesided import solver
from onesided.acceptance import random_lattice_instance
from onesided.errors import PreconditionError
from onesided.reward import ExpLinear, Indicator, PowerPlus
from onesided.stochastic import gaussian_law


def test_one_step_ratio_examples():
    law = walk(0.25)
    r, se = solver.one_step_ratio(law, PowerPlus(1), 0.0, 0.25)
    assert r == pytest.approx(1.5, rel=1e-12) and se == 0.0
    assert solver.one_step_ratio(law, PowerPlus(1), 0.0, 1.0)[0] == pytest.approx(0.75, rel=1e-12)
    assert solver.one_step_ratio(law, Indicator(0), 0.2, -1.0)[0] == math.inf
    r, se = solver.one_step_ratio(gaussian_law(-0.5, 1.0), Indicator(0), 0.2, -1.0, budget=4000)
    assert r == math.inf


def test_find_threshold_expected_maximum():
    sol = solver.find_threshold(walk(0.25), PowerPlus(1), 0.0, tol=1e-9)
    assert sol.regime == solver.FINITE
    assert sol.u == pytest.approx(0.5, abs=1e-8)
    assert sol.method == "exactLattice"


def test_find_threshold_never_stop():
    sol = solver.find_threshold(walk(0.5), PowerPlus(1), 0.0)
    assert sol.regime == solver.NEVER_STOP
    assert sol.W == math.inf and sol.beta == 0.0


def test_find_threshold_stop_everywhere():
    # q = 0.7 > log cosh 1, so e^{-qn + X_n} is a strict supermartingale
    sol = solver.find_threshold(walk(0.5), ExpLinear(1.0), 0.7)
    assert sol.regime == solver.STOP_EVERYWHERE
    assert sol.u == -math.inf


def test_value_with_threshold_examples():
    law = walk(0.25)
    v, se = solver.value_with_threshold(law, PowerPlus(1), 0.0, 0.5, 0.0)
    assert v == pytest.approx(1 / 3, abs=1e-12)
    assert solver.value_with_threshold(law, PowerPlus(1), 0.0, -math.inf, 2.0)[0] == pytest.approx(2.0)
    assert solver.value_with_threshold(law, PowerPlus(1), 0.0, 1.0, 3.0)[0] == pytest.approx(3.0)


def test_never_stop_value_diverges():
    ns = solver.never_stop_value(walk(0.5), PowerPlus(1), 0.0, [10, 20, 40])
    assert ns.W == math.inf and ns.diverged
    np.testing.assert_allclose(ns.iterates, [10, 20, 40], rtol=1e-5)


def test_never_stop_value_martingale_constant():
    q = math.log(math.cosh(1.0))
    ns = solver.never_stop_value(walk(0.5), ExpLinear(1.0), q, [10, 20, 40])
    assert not ns.diverged
    np.testing.assert_allclose(ns.iterates, 1.0, rtol=1e-9)
    assert ns.W == pytest.approx(1.0, rel=1e-9)
    assert ns(2.0) == pytest.approx(math.exp(2.0), rel=1e-9)


def test_never_stop_value_rejects_finite_regime():
    sol = solver.find_threshold(walk(0.25), PowerPlus(1), 0.0)
    with pytest.raises(PreconditionError):
        solver.never_stop_value(walk(0.25), PowerPlus(1), 0.0, [10, 20], solution=sol)


def test_solve_examples():
    res = solver.solve(walk(0.25), PowerPlus(1), 0.0)
    assert res.V(0.0) == pytest.approx(1 / 3, abs=1e-12)
    assert res.V(1.0) == pytest.approx(1.0, abs=1e-12)
    assert res.solution.u == pytest.approx(0.5, abs=1e-8)

    res = solver.solve(walk(0.5), PowerPlus(1), 0.0)
    assert res.solution.regime == solver.NEVER_STOP
    assert res.V(0.0) == math.inf


def test_solve_indicator_threshold_at_x0():
    q = 0.2
    res = solver.solve(walk(0.5), Indicator(0), q)
    assert res.solution.regime == solver.FINITE
    assert res.solution.u == pytest.approx(0.0, abs=1e-9)
    # E_x e^{-q tau_0} for the symmetric walk: s^{|x|} with s the smaller root of s^2 - 2 e^q s + 1 = 0
    s = math.exp(q) - math.sqrt(math.exp(2 * q) - 1)
    for x in (-1.0, -3.0):
        assert res.V(x) == pytest.approx(s ** abs(x), rel=1e-9)


def test_solve_mc_gaussian_expected_maximum():
    # for g = x+ and q = 0 the threshold is E(M); Gaussian walk reference from the lattice-free solver
    res = solver.solve(gaussian_law(-1.0, 1.0), PowerPlus(1), 0.0, tol=5e-3, budget=1 << 16, seed=1)
    sol = res.solution
    assert sol.regime == solver.FINITE
    lo, hi = sol.u_interval
    assert lo <= sol.u <= hi
    # Spitzer: E M = sum_n E(S_n^+)/n for S_n ~ N(-n, n)
    n = np.arange(1, 4000)
    m, sd = -n, np.sqrt(n)
    from scipy.stats import norm
    em = float(np.sum((m * norm.cdf(m / sd) + sd * norm.pdf(m / sd)) / n))
    assert abs(sol.u - em) <= max(hi - lo, 5e-3) + 0.02


def _invariants(inst):
    law, f, q = inst.law, inst.f, inst.q
    res = solver.solve(law, f, q)
    sol = res.solution
    if sol.regime != solver.FINITE:
        return
    trace = sorted(sol.ratio_trace, key=lambda t: t[0])
    rhos = [t[1] for t in trace]
    assert all(a >= b - 1e-9 * max(1.0, abs(b)) for a, b in zip(rhos, rhos[1:]) if math.isfinite(b))
    u = sol.u
    xs = u + law.unit * np.arange(-8, 5) + 0.37 * law.unit
    g = f.eval(xs)
    v = res.V(xs)
    assert np.all(v >= g - 1e-12)
    above = xs >= u
    np.testing.assert_allclose(v[above], g[above], rtol=1e-9)
    pos = g > 0
    ratio = v[pos] / g[pos]
    assert np.all(np.diff(ratio) <= 1e-9 * ratio[:-1])
    if u > f.x0:
        r_u = solver.one_step_ratio(law, f, q, u)[0]
        assert abs(r_u - 1.0) <= 1e-6
    # excessivity on a lattice-aligned grid below u
    grid = np.floor(u / law.unit) * law.unit - law.unit * np.arange(0, 6)
    for x in grid:
        cont = math.exp(-q) * sum(p * res.V(x + k) for k, p in law.atoms)
        assert res.V(x) >= cont - 1e-9 * max(1.0, cont)


@settings(max_examples=25)
@given(seed=st.integers(0, 2**32 - 1))
def test_random_lattice_invariants(seed):
    _invariants(random_lattice_instance(np.random.default_rng(seed)))


def test_threshold_solution_json():
    sol = solver.find_threshold(walk(0.25), PowerPlus(1), 0.0)
    d = sol.to_dict()
    assert d["regime"] == "Finite" and d["method"] == "exactLattice"
    assert {"u", "W", "tolerance", "ratio_trace", "seed", "budget"} <= set(d)


def test_affine_tail_certifies_never_stop():
    # h affine with slope 1 and cosh(1) > e^q: e^{-qn + X_n} is a submartingale, rho > 1 everywhere
    sol = solver.find_threshold(walk(0.5), ExpLinear(1.0), 0.2)
    assert sol.regime == solver.NEVER_STOP
    assert "affine" in sol.reason
    r, _ = solver.one_step_ratio(walk(0.5), ExpLinear(1.0), 0.2, 0.0)
    r_far, _ = solver.one_step_ratio(walk(0.5), ExpLinear(1.0), 0.2, 37.0)
    assert r > 1 and r == pytest.approx(r_far, rel=1e-12)


def test_affine_tail_with_ratio_below_one_is_finite():
    # same reward with q above log cosh 1 stops everywhere; no tail certificate is issued
    sol = solver.find_threshold(walk(0.5), ExpLinear(1.0), 0.5)
    assert sol.regime == solver.STOP_EVERYWHERE
