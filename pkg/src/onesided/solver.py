"""Threshold search for one-sided optimal stopping of a random walk.

For x with g(x) > 0 the one-step ratio

    rho(x) = E_x[e^{-q T_x} g(X_{T_x}) 1{T_x < inf}] / g(x),

with T_x the first n >= 1 such that X_n >= x, is nonincreasing in x; the optimal
threshold is u = inf{x : rho(x) <= 1} and the value is the threshold-rule value
V(x) = E_x[e^{-q tau_u} g(X_{tau_u}) 1{tau_u < inf}].

Because the walk is spatially homogeneous, rho only depends on the discounted
ladder height law (e^{-q T_0}, X_{T_0}).  Lattice laws use its exact form, other
laws a Monte Carlo sample shared by every x (common random numbers), which keeps
the estimated ratio exactly monotone in x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.stats import norm

from . import classify as _classify
from .errors import (OneSidedError, PreconditionError, ScheduleTooShort, TruncationDominates,
                     UnboundedExpectation)
from .reward import RewardFunction
from .stochastic import (IncrementLaw, LatticeLaw, PassageSample, _log_tau_values, first_passage_exact,
                         first_passage_mc, ladder_sample, ladder_vector)

STOP_EVERYWHERE, FINITE, NEVER_STOP, INCONCLUSIVE = "StopEverywhere", "Finite", "NeverStop", "Inconclusive"
EXACT, MONTE_CARLO = "exactLattice", "monteCarlo"
# the MC point estimate costs one pass per halving, so it is bisected well below tol
POINT_TOL = 1e-12


# ---------------------------------------------------------------------------
# ratio evaluators


class ExactRatio:
    """rho(x) = sum_r a_r g(x + r*unit) / g(x) from the exact ladder vector."""

    def __init__(self, law: LatticeLaw, f: RewardFunction, q: float):
        self.f = f
        self.a = ladder_vector(law, q)
        self.offsets = np.arange(self.a.size) * law.unit
        self.n = 0

    def __call__(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        hx = self.f._h(x)
        hy = self.f._h(x[:, None] + self.offsets[None, :])
        with np.errstate(invalid="ignore", over="ignore"):
            r = np.sum(self.a[None, :] * np.exp(hy - hx[:, None]), axis=1)
        r = np.where(np.isfinite(hx), r, np.inf)
        return r, np.zeros_like(r)


class EmpiricalRatio:
    """Monte Carlo ratio from ladder epochs.

    ``disc`` is e^{-q T_0} (zero for paths that never ascend) and ``over`` the
    ladder height X_{T_0} >= 0.  With ``cv`` set to c, the estimator subtracts
    c (mean(Y) - 1) with Y = disc * e^{alpha * over}, a variable of mean exactly 1
    when alpha is the root of E e^{alpha xi} = e^q.  A fixed c shifts every rho(x)
    by the same amount, so monotonicity in x is preserved.
    """

    def __init__(self, f: RewardFunction, disc: np.ndarray, over: np.ndarray, alpha: Optional[float],
                 cv: float = 0.0):
        ok = disc > 0
        self.f = f
        self.n = int(disc.size)
        self.disc = disc[ok]
        self.over = over[ok]
        self.alpha = alpha
        self.cv = float(cv) if alpha is not None else 0.0
        if self.cv:
            y = np.zeros(self.n)
            y[: ok.sum()] = self.disc * np.exp(alpha * self.over)
            self._y = y
        else:
            self._y = None

    @classmethod
    def from_sample(cls, f: RewardFunction, s: PassageSample, q: float, time_scale: float = 1.0,
                    cv: float = 0.0) -> "EmpiricalRatio":
        disc = np.where(s.passed, np.exp(-q * s.time * time_scale), 0.0)
        return cls(f, disc, np.where(s.passed, s.over, 0.0), s.alpha, cv)

    def terms(self, x: float) -> np.ndarray:
        """Per-path terms (including the zero terms of non-ascending paths)."""
        hx = float(self.f._h(np.array([x]))[0])
        z = np.zeros(self.n)
        with np.errstate(invalid="ignore", over="ignore"):
            z[: self.disc.size] = self.disc * np.exp(self.f._h(x + self.over) - hx)
        if self._y is not None:
            z = z - self.cv * (self._y - 1.0)
        return z

    def __call__(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        r = np.empty(xs.size)
        se = np.empty(xs.size)
        for i, xi in enumerate(xs):
            if not np.isfinite(self.f._h(np.array([xi]))[0]):
                r[i], se[i] = np.inf, 0.0
                continue
            z = self.terms(xi)
            if np.isposinf(z).any():
                # overflow far below the threshold: the estimate is +inf either way
                r[i], se[i] = np.inf, 0.0
                continue
            with np.errstate(over="ignore", invalid="ignore"):
                r[i] = z.mean()
                se[i] = z.std(ddof=1) / math.sqrt(self.n) if self.n > 1 else np.inf
        return r, se

    def choose_cv(self, x_ref: float) -> float:
        """Pick c in {0, 1}, whichever gives the smaller variance at ``x_ref``."""
        if self.alpha is None or not np.isfinite(self.f._h(np.array([x_ref]))[0]):
            return 0.0
        hx = float(self.f._h(np.array([x_ref]))[0])
        z = np.zeros(self.n)
        y = np.zeros(self.n)
        k = self.disc.size
        with np.errstate(over="ignore"):
            z[:k] = self.disc * np.exp(self.f._h(x_ref + self.over) - hx)
            y[:k] = self.disc * np.exp(self.alpha * self.over)
        return 1.0 if np.var(z - (y - 1.0)) < np.var(z) else 0.0


def one_step_ratio(law: IncrementLaw, f: RewardFunction, q: float, x: float, budget: int = 100_000,
                   seed: int = 0, threads: Optional[int] = None, mode: str = "auto") -> tuple[float, float]:
    """(rho(x), standard error); rho = inf where g(x) = 0."""
    if _use_exact(law, mode):
        r, se = ExactRatio(law, f, q)(x)
    else:
        s = ladder_sample(law, q, budget, seed, threads)
        r, se = EmpiricalRatio.from_sample(f, s, q)(x)
    return float(r[0]), float(se[0])


def _use_exact(law: IncrementLaw, mode: str) -> bool:
    if mode == "exact":
        if not isinstance(law, LatticeLaw):
            raise PreconditionError("exact mode needs a lattice law")
        return True
    if mode == "mc":
        return False
    return isinstance(law, LatticeLaw)


# ---------------------------------------------------------------------------
# solution type


@dataclass
class ThresholdSolution:
    regime: str
    u: Optional[float] = None
    tolerance: float = 0.0
    u_interval: Optional[tuple] = None
    W: Optional[float] = None
    beta: Optional[float] = None
    reason: Optional[str] = None
    ratio_trace: list = field(default_factory=list)
    method: str = EXACT
    budget: int = 0
    seed: Optional[int] = None
    classification: Optional[dict] = None
    cv_coefficient: float = 0.0

    @property
    def threshold(self) -> float:
        if self.regime == STOP_EVERYWHERE:
            return -math.inf
        if self.regime == NEVER_STOP:
            return math.inf
        if self.regime == FINITE:
            return float(self.u)
        raise PreconditionError(f"regime {self.regime} has no threshold")

    def to_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            v = float(v)
            if math.isinf(v):
                return "inf" if v > 0 else "-inf"
            return v

        return {
            "regime": self.regime,
            "u": num(self.u),
            "tolerance": num(self.tolerance),
            "u_interval": None if self.u_interval is None else [num(v) for v in self.u_interval],
            "W": num(self.W),
            "beta": num(self.beta),
            "reason": self.reason,
            "ratio_trace": [[num(a), num(b), num(c)] for a, b, c in self.ratio_trace],
            "method": self.method,
            "budget": self.budget,
            "seed": self.seed,
            "cv_coefficient": self.cv_coefficient,
        }


# ---------------------------------------------------------------------------
# threshold search


def _bisect(pred: Callable[[float], bool], lo: float, hi: float, tol: float) -> float:
    """Leftmost point where the monotone predicate turns true; pred(lo) false, pred(hi) true."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _lattice_scale(law: IncrementLaw) -> float:
    return law.unit if isinstance(law, LatticeLaw) else 1.0


@dataclass
class _Search:
    law: IncrementLaw
    f: RewardFunction
    q: float
    ratio: Callable
    z: float
    trace: dict = field(default_factory=dict)
    verdict: Optional[_classify.FinitenessVerdict] = None
    tail: Optional[dict] = None

    def eval(self, x: float) -> tuple[float, float]:
        if x not in self.trace:
            r, se = self.ratio(x)
            self.trace[x] = (float(r[0]), float(se[0]))
        return self.trace[x]

    def le1(self, x: float, shift: float = 0.0) -> bool:
        r, se = self.eval(x)
        return r + shift * se <= 1.0

    def classify(self):
        if self.verdict is None:
            self.verdict = _classify.light_tail_characterization(self.law, self.f, self.q)
        return self.verdict


def _default_bracket(f: RewardFunction) -> tuple[float, float]:
    if f.x0 > -math.inf:
        return f.x0, f.x0 + 100.0
    return -100.0, 100.0


def _certify_stop_everywhere(law: IncrementLaw, f: RewardFunction, q: float, floor: float) -> Optional[dict]:
    """Supermartingale certificate: e^{-q} E e^{s xi} <= 1 with s the largest log-slope that matters."""
    s = f.left_slope if f.left_slope is not None else float(f.log_deriv_left(floor))
    if not math.isfinite(s) or s > law.mgf_sup:
        return None
    lp = law.log_mgf(s)
    if lp <= q:
        return {"slope": s, "mgf": math.exp(lp), "exp_q": math.exp(q),
                "scope": "all x" if f.left_slope is not None else f"x >= {floor}"}
    return None


def _locate(search: _Search, bracket, tol: float, shift: float = 0.0, expand: bool = True):
    """Return ('finite', lo, hi) with pred(lo) false and pred(hi) true, or a regime tuple."""
    law, f = search.law, search.f
    scale = _lattice_scale(law)
    limit = 1e6 * scale
    lo, hi = (float(bracket[0]), float(bracket[1])) if bracket is not None else _default_bracket(f)
    pred = lambda x: search.le1(x, shift)  # noqa: E731
    if f.x0 > -math.inf:
        lo = max(lo, f.x0)
        if pred(lo):
            if lo == f.x0 or not expand:
                return ("finite", lo, lo)
            lo, hi = f.x0, lo
            if pred(lo):
                return ("finite", lo, lo)
    else:
        while pred(lo):
            if not expand:
                return ("finite", lo, lo)
            nxt = lo - 2.0 * (hi - lo)
            if nxt < -limit:
                return ("stop_everywhere", lo)
            lo, hi = nxt, lo
    while not pred(hi):
        if not expand:
            return ("right_exhausted", hi)
        if hi >= f.linear_from:
            # rho is constant on the affine tail of h (translation invariance of T_x - x, X_T - x)
            r, se = search.eval(hi)
            if r - search.z * se > 1.0:
                search.tail = {"x": hi, "rho": r, "se": se, "linear_from": f.linear_from}
                return ("never_stop", hi)
        v = search.classify()
        if v.verdict == _classify.INFINITE:
            return ("never_stop", hi)
        nxt = hi + 2.0 * (hi - lo)
        if nxt > limit:
            return ("right_exhausted", hi)
        lo, hi = hi, nxt
    return ("finite", lo, hi)


def find_threshold(law: IncrementLaw, f: RewardFunction, q: float, bracket: Optional[Sequence[float]] = None,
                   tol: float = 1e-9, confidence: float = 0.99, *, mode: str = "auto", budget: int = 1 << 18,
                   min_budget: int = 1 << 14, seed: int = 0, threads: Optional[int] = None,
                   control_variate: bool = True, never_stop_levels: Optional[Sequence[float]] = None,
                   ratio_factory: Optional[Callable[[int], Callable]] = None) -> ThresholdSolution:
    """Locate u = inf{x : rho(x) <= 1}.

    Exact lattice mode bisects the exact ratio to ``tol``.  Monte Carlo mode
    doubles the ladder sample from ``min_budget`` to ``budget`` until the
    confidence interval for u, [inf{rho - z se <= 1}, inf{rho + z se <= 1}], is
    within ``tol`` of the point estimate inf{rho <= 1}; otherwise the interval is
    reported as the tolerance.

    ``ratio_factory(n)`` overrides the ratio source (used for continuous-time
    ladder samples); it must return a callable x -> (rho array, se array).
    """
    if bracket is not None and not bracket[0] < bracket[1]:
        raise PreconditionError("bracket needs x_lo < x_hi")
    if not tol > 0:
        raise PreconditionError("tol must be positive")
    if q < 0:
        raise PreconditionError("q must be nonnegative")
    exact = ratio_factory is None and _use_exact(law, mode)
    z = float(norm.ppf(0.5 + 0.5 * confidence))

    if exact:
        search = _Search(law, f, q, ExactRatio(law, f, q), z)
        return _finish(search, _locate(search, bracket, tol), tol, EXACT, 0, None, f, q, law, never_stop_levels)

    if ratio_factory is None:
        def ratio_factory(n, _cv=None):
            s = ladder_sample(law, q, n, seed, threads)
            return EmpiricalRatio.from_sample(f, s, q)

    n = max(2, min(min_budget, budget))
    cv = 0.0
    while True:
        try:
            base = ratio_factory(n)
        except (PreconditionError, UnboundedExpectation) as exc:
            # no exponential bound for abandoned paths (typically E xi >= 0 with q = 0): defer to classify
            search = _Search(law, f, q, None, z)
            if search.classify().verdict == _classify.INFINITE:
                return _finish(search, ("never_stop", math.inf), tol, MONTE_CARLO, 0, seed, f, q, law,
                               never_stop_levels)
            sol = ThresholdSolution(INCONCLUSIVE, beta=f.beta, method=MONTE_CARLO, budget=0, seed=seed,
                                    reason=f"ladder sampling impossible ({exc}) and the finiteness tests give "
                                           f"{search.verdict.verdict}")
            sol.classification = search.verdict.to_dict()
            return sol
        search = _Search(law, f, q, base, z)
        loc = _locate(search, bracket, tol)
        if loc[0] != "finite":
            sol = _finish(search, loc, tol, MONTE_CARLO, n, seed, f, q, law, never_stop_levels)
            return sol
        _, lo, hi = loc
        if lo == hi:
            u_hat = lo
        else:
            u_hat = _bisect(search.le1, lo, hi, min(tol * 1e-3, POINT_TOL))
        if control_variate and isinstance(base, EmpiricalRatio):
            cv = base.choose_cv(u_hat)
            if cv:
                base.cv = cv
                base._y = np.zeros(base.n)
                base._y[: base.disc.size] = base.disc * np.exp(base.alpha * base.over)
                search = _Search(law, f, q, base, z, verdict=search.verdict)
                loc = _locate(search, bracket, tol)
                if loc[0] != "finite":
                    return _finish(search, loc, tol, MONTE_CARLO, n, seed, f, q, law, never_stop_levels)
                _, lo, hi = loc
                u_hat = lo if lo == hi else _bisect(search.le1, lo, hi, min(tol * 1e-3, POINT_TOL))
        u_lo = _interval_end(search, bracket, tol, -z, u_hat)
        u_hi = _interval_end(search, bracket, tol, +z, u_hat)
        half = max(u_hat - u_lo, u_hi - u_hat)
        if half <= tol or n >= budget:
            break
        n = min(2 * n, budget)
    u_lo, u_hi = min(u_lo, u_hat), max(u_hi, u_hat)  # ends are bisected more coarsely than u_hat
    sol = ThresholdSolution(FINITE, u=u_hat, tolerance=max(half, tol), u_interval=(u_lo, u_hi), beta=f.beta,
                            method=MONTE_CARLO, budget=n, seed=seed, cv_coefficient=cv)
    sol.ratio_trace = _trace(search)
    if search.verdict is not None:
        sol.classification = search.verdict.to_dict()
    return sol


def _interval_end(search: _Search, bracket, tol, shift, u_hat) -> float:
    """inf{rho + shift*se <= 1}, searched near the point estimate."""
    f = search.f
    pred = lambda x: search.le1(x, shift)  # noqa: E731
    if f.x0 > -math.inf and pred(f.x0):
        return f.x0
    step = max(tol, 1e-3)
    if pred(u_hat):
        hi = u_hat
        lo = u_hat - step
        while pred(lo):
            hi, step = lo, 2 * step
            lo = u_hat - step
            if f.x0 > -math.inf and lo <= f.x0:
                lo = f.x0
                break
            if step > 1e7:
                return -math.inf
    else:
        lo = u_hat
        hi = u_hat + step
        while not pred(hi):
            lo, step = hi, 2 * step
            hi = u_hat + step
            if step > 1e7:
                return math.inf
    return _bisect(pred, lo, hi, tol * 1e-3)


def _trace(search: _Search) -> list:
    return [(x, r, se) for x, (r, se) in sorted(search.trace.items())]


def _finish(search: _Search, loc, tol, method, n, seed, f, q, law, never_stop_levels) -> ThresholdSolution:
    kind = loc[0]
    sol = ThresholdSolution(INCONCLUSIVE, method=method, budget=n, seed=seed, beta=f.beta)
    if kind == "finite":
        _, lo, hi = loc
        u = lo if lo == hi else _bisect(search.le1, lo, hi, tol)
        sol.regime, sol.u, sol.tolerance = FINITE, u, (0.0 if lo == hi else tol)
    elif kind == "stop_everywhere":
        cert = _certify_stop_everywhere(law, f, q, loc[1])
        if cert is not None:
            sol.regime, sol.u = STOP_EVERYWHERE, -math.inf
            sol.reason = f"certified: e^-q E exp({cert['slope']:.6g} xi) = {cert['mgf'] * math.exp(-q):.6g} <= 1"
        else:
            sol.reason = "rho <= 1 down to the left floor but the supermartingale certificate fails"
    elif kind == "never_stop":
        sol.regime, sol.u = NEVER_STOP, math.inf
        if search.tail is not None:
            t = search.tail
            sol.reason = (f"certified: h is affine on [{t['linear_from']:.6g}, inf), where rho is constant, "
                          f"and rho({t['x']:.6g}) = {t['rho']:.6g} > 1")
        try:
            ns = never_stop_value(law, f, q, levels=never_stop_levels, seed=seed or 0)
            sol.W = ns.W
        except (ScheduleTooShort, OneSidedError) as exc:
            sol.W = None
            sol.reason = "; ".join(filter(None, [sol.reason, f"W not determined: {exc}"]))
    else:
        v = search.classify()
        sol.reason = f"rho > 1 up to x = {loc[1]:.6g} and the finiteness tests give {v.verdict}"
    sol.ratio_trace = _trace(search)
    if search.verdict is not None:
        sol.classification = search.verdict.to_dict()
    return sol


# ---------------------------------------------------------------------------
# values


def value_with_threshold(law: IncrementLaw, f: RewardFunction, q: float, threshold: float, x: float,
                         budget: int = 100_000, seed: int = 0, threads: Optional[int] = None,
                         mode: str = "auto", control_variate: bool = False) -> tuple[float, float]:
    """(Q_threshold(x), se): value of stopping at the first entry into [threshold, inf)."""
    if threshold == -math.inf or x >= threshold:
        return float(f.eval(x)), 0.0
    if threshold == math.inf:
        raise PreconditionError("an infinite threshold has no first-entry rule")
    if _use_exact(law, mode):
        return first_passage_exact(law, f, q, threshold, x, "tau"), 0.0
    est = first_passage_mc(law, f, q, threshold, x, "tau", budget, seed, threads, control_variate=control_variate,
                           stream=(4,))
    return est.mean, est.se


@dataclass
class NeverStopValue:
    W: float
    beta: float
    levels: list
    iterates: list
    diverged: bool

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        with np.errstate(over="ignore", invalid="ignore"):
            out = np.exp(self.beta * xa) * self.W
        return float(out) if np.ndim(x) == 0 else out

    def to_dict(self):
        return {"W": "inf" if math.isinf(self.W) else self.W, "beta": self.beta,
                "levels": list(self.levels), "iterates": [float(v) for v in self.iterates],
                "diverged": self.diverged}


def never_stop_value(law: IncrementLaw, f: RewardFunction, q: float, levels: Optional[Sequence[float]] = None,
                     tol: float = 1e-6, solution: Optional[ThresholdSolution] = None, budget: int = 4000,
                     seed: int = 0, cap: float = 1e12, threads: Optional[int] = None) -> NeverStopValue:
    """W = lim_y Q_y(0), the increasing limit of first-entry values along ``levels``.

    The iterates are normalised as Q_y(0) for g itself; V(x) = e^{beta x} W.
    Divergence is declared when the value exceeds ``cap`` or when increments do
    not shrink along a doubling schedule.
    """
    if solution is not None and solution.regime != NEVER_STOP:
        raise PreconditionError(f"neverStopValue needs the NeverStop regime, got {solution.regime}")
    if levels is None:
        levels = [10.0, 20.0, 40.0, 80.0] if isinstance(law, LatticeLaw) else [4.0, 8.0, 16.0]
    levels = [float(y) for y in levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise PreconditionError("levels must be increasing with at least two entries")
    its = []
    for i, y in enumerate(levels):
        if isinstance(law, LatticeLaw):
            v = float(np.exp(_log_tau_values(law, f, q, y, np.array([0.0]))[0]))
        else:
            try:
                est = first_passage_mc(law, f, q, y, 0.0, "tau", budget, seed, threads, allow_no_drift=True,
                                       stream=(5, i), check_truncation=False)
                v = est.mean
            except UnboundedExpectation:
                v = math.inf
        its.append(v)
        if not math.isfinite(v) or v > cap:
            return NeverStopValue(math.inf, f.beta, levels[: i + 1], its, True)
    d = np.diff(its)
    if d.size >= 2 and d[-1] > tol * max(1.0, abs(its[-1])) and d[-1] >= d[-2] * (1 - 1e-9):
        return NeverStopValue(math.inf, f.beta, levels, its, True)
    if abs(d[-1]) <= tol * max(1.0, abs(its[-1])):
        W = its[-1]
        if d.size >= 2 and 0 < d[-1] < d[-2]:
            r = d[-1] / d[-2]
            W = its[-1] + d[-1] * r / (1 - r)
        return NeverStopValue(float(W), f.beta, levels, its, False)
    raise ScheduleTooShort(f"last two iterates {its[-2]:.6g}, {its[-1]:.6g} differ by more than {tol:g}")


class ValueFunction:
    """V(x) accessor for a solved instance."""

    def __init__(self, law: IncrementLaw, f: RewardFunction, q: float, solution: ThresholdSolution,
                 never_stop: Optional[NeverStopValue] = None, budget: int = 100_000, seed: int = 0,
                 threads: Optional[int] = None, mode: str = "auto"):
        self.law, self.f, self.q, self.solution = law, f, q, solution
        self.never_stop = never_stop
        self.budget, self.seed, self.threads, self.mode = budget, seed, threads, mode
        self.exact = _use_exact(law, mode)

    def with_error(self, x):
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        reg = self.solution.regime
        if reg == INCONCLUSIVE:
            raise PreconditionError(f"no value function: {self.solution.reason}")
        if reg == NEVER_STOP:
            W = self.solution.W if self.never_stop is None else self.never_stop.W
            if W is None:
                raise PreconditionError("W was not determined")
            with np.errstate(over="ignore", invalid="ignore"):
                return np.exp(self.f.beta * xs) * W, np.zeros(xs.size)
        u = self.solution.threshold
        v = np.array(self.f.eval(xs), dtype=float)
        se = np.zeros(xs.size)
        below = xs < u
        if np.any(below):
            if self.exact:
                v[below] = np.exp(_log_tau_values(self.law, self.f, self.q, u, xs[below]))
            else:
                for i in np.nonzero(below)[0]:
                    v[i], se[i] = value_with_threshold(self.law, self.f, self.q, u, xs[i], self.budget,
                                                       self.seed, self.threads, "mc")
        return v, se

    def __call__(self, x):
        v, _ = self.with_error(x)
        return float(v[0]) if np.ndim(x) == 0 else v

    def limits_at_threshold(self) -> tuple[float, float]:
        """(V(u-), V(u)); they can differ when u = x0 and g jumps there."""
        u = self.solution.threshold
        if not math.isfinite(u):
            raise PreconditionError("one-sided limits need a finite threshold")
        if self.exact:
            left = first_passage_exact(self.law, self.f, self.q, u, u, "tau+")
        else:
            left = first_passage_mc(self.law, self.f, self.q, u, u, "tau+", self.budget, self.seed,
                                    self.threads, stream=(6,)).mean
        return left, float(self.f.eval(u))


@dataclass
class SolveResult:
    solution: ThresholdSolution
    V: Optional[ValueFunction]
    classification: dict
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = {"solution": self.solution.to_dict(), "classification": self.classification, "errors": self.errors}
        if self.V is not None and self.solution.regime == FINITE and self.solution.u == self.V.f.x0:
            try:
                lo, hi = self.V.limits_at_threshold()
                d["limits_at_threshold"] = {"left": lo, "right": hi}
            except OneSidedError:
                pass
        return d


def solve(law: IncrementLaw, f: RewardFunction, q: float, *, bracket=None, tol: float = 1e-9,
          confidence: float = 0.99, mode: str = "auto", budget: int = 1 << 18, value_budget: int = 100_000,
          seed: int = 0, threads: Optional[int] = None, never_stop_levels=None) -> SolveResult:
    """Classify, find the threshold and build the value accessor."""
    verdict = _classify.light_tail_characterization(law, f, q)
    cls = _classify.classify(law, f, q)
    errors = []
    try:
        sol = find_threshold(law, f, q, bracket, tol, confidence, mode=mode, budget=budget, seed=seed,
                             threads=threads, never_stop_levels=never_stop_levels)
    except (UnboundedExpectation, TruncationDominates, PreconditionError) as exc:
        errors.append(f"{type(exc).__name__}: {exc}")
        sol = ThresholdSolution(INCONCLUSIVE, reason="; ".join(errors),
                                method=EXACT if _use_exact(law, mode) else MONTE_CARLO, seed=seed)
    sol.classification = verdict.to_dict()
    if sol.regime == INCONCLUSIVE:
        return SolveResult(sol, None, cls, errors)
    V = ValueFunction(law, f, q, sol, None, value_budget, seed, threads, mode)
    return SolveResult(sol, V, cls, errors)
