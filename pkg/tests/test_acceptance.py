"""Acceptance gate: the nine benchmark criteria with pinned tolerances.

Each test prints one PASS/FAIL line (visible even under output capture) and
then re-checks the measured numbers against oracles computed here,
independently of the library.
"""

import math

import pytest
from scipy.optimize import brentq

from onesided import acceptance, smoothfit, solver


@pytest.fixture
def run(capsys):
    def _run(k):
        r = acceptance.CRITERIA[k]()
        with capsys.disabled():
            print("\n" + r.line())
            for f in r.failures:
                print(f"    failure: {f}")
        return r
    return _run


def test_criterion_1_expected_maximum(run):
    r = run(1)
    p = 0.25
    em = p / (1 - 2 * p)  # geometric all-time maximum of the +-1 walk
    hit = p / (1 - p)  # probability of ever climbing one unit
    m = r.measured
    assert m["regime"] == solver.FINITE
    assert abs(m["u"] - em) <= 1e-3
    assert abs(m["V0"] - hit) <= 1e-6
    assert m["dp_threshold"] == 1.0
    assert r.passed


def test_criterion_2_never_stop(run):
    r = run(2)
    m = r.measured
    assert m["regime"] == solver.NEVER_STOP and m["u"] == math.inf
    assert m["classify"] == "Infinite" and m["W"] == math.inf
    assert r.passed


def test_criterion_3_brownian_indicator(run):
    r = run(3)
    m = r.measured
    target = math.exp(-math.sqrt(2 * 0.5))
    assert abs(m["u"]) <= 0.05
    assert abs(m["V_minus1"] - target) <= max(0.01, 4 * m["se"])
    assert r.passed


def test_criterion_4_kink_breaks_smooth_fit(run):
    r = run(4)
    m = r.measured
    assert abs(m["V_prime_left"] - math.sqrt(2 * 0.5)) <= 0.05
    assert m["g_prime_right"] == 0.0
    assert m["verdict"] == smoothfit.SMOOTH_FIT_FAILS
    assert r.passed


def test_criterion_5_irregular_degeneracy(run):
    r = run(5)
    m = r.measured
    lam = brentq(lambda x: 0.5 * math.expm1(x) - x, 0.5, 5.0, xtol=1e-15)
    assert abs(m["lambda_prime"] - lam) <= 1e-4
    assert abs(m["u"]) <= 0.05
    assert abs(m["V_minus_half"] - math.exp(-lam / 2)) <= 4 * m["se"]
    assert m["zeta"] == 1.0 and m["A1"] == smoothfit.HOLDS
    assert abs(m["fd_derivative"] - m["overshoot_formula"]) <= r.tolerances["derivatives"]
    assert r.passed


def test_criterion_6_one_sided_structure(run):
    r = run(6)
    assert r.measured["instances"] == 100 and r.measured["failing"] == 0
    assert r.passed


def test_criterion_7_ratio_monotone_fixed_point(run):
    r = run(7)
    assert r.measured["instances"] == 100 and r.measured["failing"] == 0
    assert r.measured["worst_fixed_point"] <= 1e-6
    assert r.passed


def test_criterion_8_dyadic_monotonicity(run):
    r = run(8)
    assert r.measured["instances"] == 10 and r.measured["failing"] == 0
    assert r.passed


def test_criterion_9_classifier_consistency(run):
    r = run(9)
    assert r.measured["instances"] == 30 and r.measured["failing"] == 0
    assert r.measured["worst_scaling_shift"] <= 1e-9
    assert r.passed
