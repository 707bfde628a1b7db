"""Numerical smooth-fit analysis at the optimal threshold.

V = g on [u, inf), so V'(u+) = g'(u+).  The left derivative is estimated by
one-sided differences (g(u) - V(u - eps)) / eps with Richardson extrapolation
over a halving schedule.  For processes with 0 irregular for (0, inf) it is
also given by the overshoot formula

    V'(u-) = E[e^{-q tau_{0+}} g'((u + X_{tau_{0+}})-) 1{tau_{0+} < inf}],

and smooth fit holds exactly when h'((u + zeta)-) = h'(u+), zeta being the
essential supremum of the overshoot X_{tau_{0+}}.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.stats import norm

from . import levy, solver
from .errors import NoiseDominates, PreconditionError
from .reward import RewardFunction
from .stochastic import IncrementLaw, LatticeLaw, MCEstimate, first_passage_exact, first_passage_mc

DEFAULT_STEPS = (0.2, 0.1, 0.05, 0.025)
HOLDS, FAILS, BORDERLINE = "holds", "fails", "borderline"
SMOOTH_FIT_HOLDS, SMOOTH_FIT_FAILS = "SmoothFitHolds", "SmoothFitFails"
A1_TOL, A1_BAND = 1e-9, 1e-6


@dataclass
class ThresholdEstimate:
    """Point estimate of u with an uncertainty interval."""

    u: float
    lo: float
    hi: float

    @classmethod
    def from_solution(cls, sol: solver.ThresholdSolution) -> "ThresholdEstimate":
        if sol.regime != solver.FINITE:
            raise PreconditionError(f"smooth-fit analysis needs a finite threshold, got {sol.regime}")
        if sol.u_interval is not None:
            lo, hi = sol.u_interval
            lo, hi = min(lo, sol.u - sol.tolerance), max(hi, sol.u + sol.tolerance)
        else:
            lo, hi = sol.u - sol.tolerance, sol.u + sol.tolerance
        return cls(float(sol.u), float(lo), float(hi))

    @classmethod
    def from_sequence(cls, seq: levy.ThresholdSequence) -> "ThresholdEstimate":
        """Extrapolated dyadic limit; the tolerance covers the extrapolation correction."""
        last = seq.levels[-1]
        if last.regime != solver.FINITE or not math.isfinite(seq.extrapolated):
            raise PreconditionError("the dyadic sequence does not end in a finite threshold")
        tol = max(last.tolerance, abs(seq.extrapolated - seq.raw_last))
        return cls(seq.extrapolated, seq.extrapolated - tol, seq.extrapolated + tol)


def snap_to_kink(f: RewardFunction, est: ThresholdEstimate) -> tuple[float, bool]:
    """Evaluate at a kink of g when one lies inside the uncertainty interval of u."""
    ks = np.asarray(f.kinks(), dtype=float)
    inside = ks[(ks >= est.lo) & (ks <= est.hi)]
    if inside.size:
        return float(inside[np.argmin(np.abs(inside - est.u))]), True
    return est.u, False


# ---------------------------------------------------------------------------
# finite differences


@dataclass
class DerivativeEstimate:
    estimate: float
    error: float
    se: float
    residual: float
    u_eval: float
    snapped: bool
    table: list = field(default_factory=list)  # (eps, difference, se)
    dyadic_bias: Optional[float] = None
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def richardson(values: Sequence[float], ses: Sequence[float]) -> tuple[float, float, float]:
    """Extrapolate D(eps_k), eps_k halving, assuming an expansion in powers of eps.

    Returns (estimate, standard error, |last - second to last column|).
    """
    n = len(values)
    W = [np.eye(n)[k] for k in range(n)]  # weight vectors of each table entry
    col = list(W)
    prev_last = col[-1]
    for j in range(1, n):
        p = 2.0 ** j
        new = [(p * col[k] - col[k - 1]) / (p - 1) for k in range(1, len(col))]
        prev_last = col[-1]
        col = new
    w = col[-1]
    v = np.asarray(values, dtype=float)
    s = np.asarray(ses, dtype=float)
    est = float(w @ v)
    se = float(math.sqrt(np.sum((w * s) ** 2)))
    resid = abs(est - float(prev_last @ v))
    return est, se, resid


def _value_below(target, f, q, u, x, budget, seed, stream, level, threads):
    """V(x) for x < u under the threshold rule at u, with a control variate where it is exact in law."""
    if isinstance(target, LatticeLaw):
        return first_passage_exact(target, f, q, u, x, "tau"), 0.0
    if isinstance(target, IncrementLaw):
        e = first_passage_mc(target, f, q, u, x, "tau", budget, seed, threads, control_variate=True, stream=stream)
        return e.mean, e.se
    if levy.regularity_of_zero(target) == levy.IRREGULAR:
        e = levy.continuous_value(target, f, q, u, x, budget, seed + stream[-1], threads, control_variate=True)
    else:
        e = levy.value_at_level(target, f, q, level, u, x, budget, seed + stream[-1], threads, bridge=True,
                                control_variate=True)
    return e.mean, e.se


def left_derivative_of_value(target: Union[IncrementLaw, levy.LevyModel], f: RewardFunction, q: float,
                             threshold: Union[solver.ThresholdSolution, ThresholdEstimate, float],
                             steps: Sequence[float] = DEFAULT_STEPS, budget: int = 1 << 15,
                             max_budget: int = 1 << 18, seed: int = 0, level: int = 10,
                             threads: Optional[int] = None, dyadic_diagnostic: bool = True) -> DerivativeEstimate:
    """Richardson-extrapolated (g(u) - V(u - eps)) / eps.

    For continuous-time models with 0 regular, passage is monitored between the
    dyadic grid points at ``level`` by Brownian-bridge crossing, so that the
    values approximate the continuous rule rather than the dyadic one.
    """
    est = _as_estimate(threshold)
    if f.x0 > -math.inf and not est.u > f.x0:
        raise PreconditionError("derivative at u needs x0 < u; at u = x0 the left derivative is not defined here")
    u, snapped = snap_to_kink(f, est)
    gu = float(f.eval(u))
    steps = sorted((float(s) for s in steps), reverse=True)
    if any(b != a / 2 for a, b in zip(steps, steps[1:])):
        raise PreconditionError("steps must halve successively")
    diffs, ses = [], []
    for k, eps in enumerate(steps):
        n = min(max_budget, budget << k)
        v, s = _value_below(target, f, q, u, u - eps, n, seed, (20, k), level, threads)
        diffs.append((gu - v) / eps)
        ses.append(s / eps)
    if ses[-1] > 0 and ses[-1] * steps[-1] >= abs(diffs[-1] * steps[-1]):
        raise NoiseDominates(f"standard error {ses[-1] * steps[-1]:.3g} exceeds the difference "
                             f"{diffs[-1] * steps[-1]:.3g} at eps = {steps[-1]}")
    e, se, resid = richardson(diffs, ses)
    out = DerivativeEstimate(e, se + resid, se, resid, u, snapped, [(s, d, x) for s, d, x in zip(steps, diffs, ses)])
    if (dyadic_diagnostic and isinstance(target, levy.LevyModel)
            and levy.regularity_of_zero(target) == levy.REGULAR):
        eps = steps[-1]
        vb = out.table[-1][1]
        vd = levy.value_at_level(target, f, q, level, u, u - eps, min(max_budget, budget << (len(steps) - 1)),
                                 seed + 99, threads, control_variate=True)
        out.dyadic_bias = float(vb - (gu - vd.mean) / eps)
        out.note = f"grid-only monitoring at level {level} changes the smallest-step difference by {out.dyadic_bias:.4g}"
    return out


def _as_estimate(threshold) -> ThresholdEstimate:
    if isinstance(threshold, ThresholdEstimate):
        return threshold
    if isinstance(threshold, solver.ThresholdSolution):
        return ThresholdEstimate.from_solution(threshold)
    if isinstance(threshold, levy.ThresholdSequence):
        return ThresholdEstimate.from_sequence(threshold)
    u = float(threshold)
    if not math.isfinite(u):
        raise PreconditionError("smooth-fit analysis needs a finite threshold")
    return ThresholdEstimate(u, u, u)


# ---------------------------------------------------------------------------
# irregular case


def _require_irregular(model: levy.LevyModel):
    if not isinstance(model, levy.LevyModel) or levy.regularity_of_zero(model) != levy.IRREGULAR:
        raise PreconditionError("the overshoot formula applies to models with 0 irregular for (0, inf)")


def overshoot_derivative_formula(model: levy.LevyModel, f: RewardFunction, q: float, u: float,
                                 budget: int = 1 << 18, seed: int = 0, threads: Optional[int] = None) -> MCEstimate:
    """E[e^{-q tau_{0+}} g'((u + X_{tau_{0+}})-) 1{tau_{0+} < inf}] with the ladder control variate."""
    _require_irregular(model)
    if not math.isfinite(u):
        raise PreconditionError("u must be finite")
    s = levy.simulate_continuous(model, q, 0.0, True, budget, seed, (21,), threads)
    ok = s.passed
    z = np.zeros(s.n)
    y = np.zeros(s.n)
    with np.errstate(over="ignore"):
        disc = np.exp(-q * s.time[ok])
        z[ok] = disc * np.asarray(f.deriv_left(u + s.over[ok]), dtype=float)
        y[ok] = disc * np.exp(s.alpha * s.over[ok])
    vy = y.var()
    c = float(np.cov(z, y, bias=True)[0, 1] / vy) if vy > 0 else 0.0
    w = z - c * (y - 1.0)
    return MCEstimate(float(w.mean()), float(w.std(ddof=1) / math.sqrt(s.n)), s.n, cv_coefficient=c)


@dataclass
class OvershootSup:
    zeta: float
    analytic: bool
    observed_max: float
    note: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["zeta"] = "inf" if math.isinf(self.zeta) else self.zeta
        return d


def overshoot_ess_sup(model: levy.LevyModel, budget: int = 1 << 16, seed: int = 0,
                      threads: Optional[int] = None) -> OvershootSup:
    """Essential supremum of the overshoot at the first strict ascent from 0."""
    _require_irregular(model)
    obs = 0.0
    try:
        s = levy.simulate_continuous(model, 0.0 if model.mean < 0 else 0.1, 0.0, True, budget, seed, (22,), threads)
        if s.passed.any():
            obs = float(s.over[s.passed].max())
    except PreconditionError:
        pass
    sup = model.jump.sup if model.rate > 0 else 0.0
    if math.isinf(sup):
        return OvershootSup(math.inf, True, obs, "jump support unbounded above")
    if model.drift < 0:
        return OvershootSup(sup, True, obs, "negative drift reaches every level just below 0, so jumps near the "
                                            "top of their support give overshoots arbitrarily close to it")
    return OvershootSup(max(obs, 0.0), False, obs, f"largest observed overshoot; a lower bound (jump sup {sup:g})")


@dataclass
class A1Result:
    status: str
    slope_left_at_end: float
    slope_right_at_u: float
    gap: float
    closed_form: Optional[Callable] = field(default=None, repr=False)

    def to_dict(self) -> dict:
        return {"status": self.status, "slope_left_at_end": self.slope_left_at_end,
                "slope_right_at_u": self.slope_right_at_u, "gap": self.gap}


def check_criterion_a1(f: RewardFunction, u: float, zeta: float, tol: float = A1_TOL,
                       band: float = A1_BAND) -> A1Result:
    """Compare h'((u + zeta)-) with h'(u+); on equality V(x) = g(u) e^{h'(u+)(x - u)} for x < u."""
    if not math.isfinite(u):
        raise PreconditionError("u must be finite")
    right = float(f.log_deriv_right(u))
    left = float(f.beta) if math.isinf(zeta) else float(f.log_deriv_left(u + zeta))
    gap = right - left
    scale = max(1.0, abs(right))
    if abs(gap) <= tol * scale:
        gu = float(f.eval(u))

        def closed(x, _gu=gu, _s=right, _u=u):
            xa = np.asarray(x, dtype=float)
            out = np.where(xa < _u, _gu * np.exp(_s * (xa - _u)), f.eval(xa))
            return float(out) if np.ndim(x) == 0 else out

        return A1Result(HOLDS, left, right, gap, closed)
    if abs(gap) <= band * scale:
        return A1Result(BORDERLINE, left, right, gap)
    return A1Result(FAILS, left, right, gap)


def _a1_gap(f: RewardFunction, u: float, zeta: float) -> float:
    right = float(f.log_deriv_right(u))
    left = float(f.beta) if math.isinf(zeta) else float(f.log_deriv_left(u + zeta))
    return right - left


def check_criterion_a1_interval(f: RewardFunction, lo: float, hi: float, zeta: float, tol: float = A1_TOL,
                                band: float = A1_BAND) -> tuple[A1Result, float]:
    """A1 at the point of [lo, hi] where the slope gap is smallest.

    A threshold estimated by simulation is only known up to an interval, and
    when h is smooth at u the ratio touches 1 quadratically there, so the
    crossing is resolved to roughly the square root of machine precision.
    Returns the result and the point used.
    """
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise PreconditionError("need a finite interval lo <= hi")
    cands = [lo, hi, 0.5 * (lo + hi)]
    ks = np.asarray(f.kinks(), dtype=float)
    shifted = ks if math.isinf(zeta) else np.concatenate([ks, ks - zeta])
    cands += [float(k) for k in shifted if lo <= k <= hi]
    if hi > lo:
        r = minimize_scalar(lambda x: abs(_a1_gap(f, x, zeta)), bounds=(lo, hi), method="bounded",
                            options={"xatol": 1e-14 * max(1.0, abs(lo), abs(hi))})
        cands.append(float(r.x))
    best = min(cands, key=lambda x: abs(_a1_gap(f, x, zeta)))
    return check_criterion_a1(f, best, zeta, tol, band), best


def _gap_crosses_zero(model, f, q, est: ThresholdEstimate, z, steps, budget, max_budget, seed, level,
                      threads) -> Optional[str]:
    """Does D(y) = V_y'(y-) - g'(y) vanish for some y in the threshold interval?

    V_y is the value of the rule that stops above y.  An error e in u moves D by
    about D'(u) e, which dominates the Monte Carlo error for simulated thresholds.
    When g is C^1 on the interval D is continuous, so a sign change (or an end
    within noise of zero) locates a smooth-fit point inside it.
    """
    lo, hi = est.lo, est.hi
    if not hi > lo or (f.x0 > -math.inf and not lo > f.x0):
        return None
    ks = np.asarray(f.kinks(), dtype=float)
    if np.any((ks >= lo) & (ks <= hi)):
        return None
    gaps = []
    for y in (lo, hi):
        dy = left_derivative_of_value(model, f, q, y, steps, budget, max_budget, seed, level, threads,
                                      dyadic_diagnostic=False)
        gaps.append((dy.estimate - float(f.deriv_right(y)), z * dy.se + dy.residual))
    (d_lo, n_lo), (d_hi, n_hi) = gaps
    if d_lo * d_hi <= 0 or abs(d_lo) <= n_lo or abs(d_hi) <= n_hi:
        return (f"V'(y-) - g'(y) goes from {d_lo:.3g} to {d_hi:.3g} across the threshold interval "
                f"[{lo:.6g}, {hi:.6g}], so it vanishes inside")
    return None


# ---------------------------------------------------------------------------
# report


@dataclass
class SmoothFitReport:
    regularity: str
    u: float
    u_eval: float
    g_prime_left: float
    g_prime_right: float
    v_prime_left: float
    v_prime_left_error: float
    v_prime_right: float
    zeta: Optional[float]
    zeta_note: str
    criterion_a1: Optional[str]
    verdict: str
    overshoot_formula: Optional[float] = None
    overshoot_formula_error: Optional[float] = None
    fd_table: list = field(default_factory=list)
    dyadic_bias: Optional[float] = None
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["zeta"] is not None and math.isinf(d["zeta"]):
            d["zeta"] = "inf"
        return d

    def table_tsv(self) -> str:
        lines = ["eps\tdifference\tse"]
        lines += [f"{e!r}\t{d!r}\t{s!r}" for e, d, s in self.fd_table]
        return "\n".join(lines) + "\n"


def analyze(model: levy.LevyModel, f: RewardFunction, q: float,
            threshold: Union[solver.ThresholdSolution, ThresholdEstimate, levy.ThresholdSequence, None] = None,
            confidence: float = 0.99, budget: int = 1 << 15, max_budget: int = 1 << 18, seed: int = 0,
            level: int = 10, threads: Optional[int] = None, steps: Sequence[float] = DEFAULT_STEPS) -> SmoothFitReport:
    """Full smooth-fit report for a continuous-time model."""
    z = float(norm.ppf(0.5 + 0.5 * confidence))
    reg = levy.regularity_of_zero(model)
    if threshold is None:
        if reg == levy.IRREGULAR:
            threshold = levy.continuous_threshold(model, f, q, tol=1e-4, seed=seed, threads=threads)
        else:
            threshold = levy.threshold_sequence(model, f, q, level, seed=seed, threads=threads)
    est = _as_estimate(threshold)
    d = left_derivative_of_value(model, f, q, est, steps, budget, max_budget, seed, level, threads)
    u = d.u_eval
    gl, gr = float(f.deriv_left(u)), float(f.deriv_right(u))
    notes = []
    if d.snapped:
        notes.append(f"threshold snapped to the reward kink at {u:g}")
    zeta, znote, a1, of, ofe = None, "", None, None, None
    numeric_holds = abs(d.estimate - gr) <= z * d.se + d.residual
    if reg == levy.IRREGULAR:
        zs = overshoot_ess_sup(model, seed=seed, threads=threads)
        zeta, znote = zs.zeta, zs.note
        a1r = check_criterion_a1(f, u, zeta)
        if a1r.status != HOLDS and not d.snapped:
            a1i, u_a1 = check_criterion_a1_interval(f, est.lo, est.hi, zeta)
            if a1i.status == HOLDS:
                a1r = a1i
                notes.append(f"criterion A1 holds at {u_a1:.3g} inside the threshold interval "
                             f"[{est.lo:.3g}, {est.hi:.3g}]")
        a1 = a1r.status
        ofm = overshoot_derivative_formula(model, f, q, u, max_budget, seed, threads)
        of, ofe = ofm.mean, ofm.se
        if a1 == HOLDS:
            verdict = SMOOTH_FIT_HOLDS
        elif a1 == FAILS:
            verdict = SMOOTH_FIT_FAILS
        else:
            verdict = SMOOTH_FIT_HOLDS if numeric_holds else SMOOTH_FIT_FAILS
            notes.append("criterion A1 borderline; verdict from the numerical derivative")
    else:
        verdict = SMOOTH_FIT_HOLDS if numeric_holds else SMOOTH_FIT_FAILS
        if not numeric_holds and not d.snapped:
            cross = _gap_crosses_zero(model, f, q, est, z, steps, budget, max_budget, seed, level, threads)
            if cross is not None:
                verdict = SMOOTH_FIT_HOLDS
                notes.append(cross)
    if d.note:
        notes.append(d.note)
    return SmoothFitReport(reg, est.u, u, gl, gr, d.estimate, d.error, gr, zeta, znote, a1, verdict, of, ofe,
                           d.table, d.dyadic_bias, notes)
