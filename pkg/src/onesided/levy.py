"""Continuous-time jump-diffusions: dyadic discretisation and threshold sequences.

X_t = drift*t + sigma*B_t + compound Poisson(rate, jump law).  The dyadic
problem restricts stopping to multiples of dt = 2^-l; its threshold u_l is
nondecreasing in l and converges to the continuous threshold.

For sigma = 0 and drift <= 0 the path only moves up by jumps, so passage times
can be simulated exactly in continuous time (no dyadic grid).  Those models
also have 0 irregular for (0, inf), and the threshold can be computed from the
strict ascending ladder (first entry into (0, inf)) instead of the dyadic limit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _backend, solver
from .errors import InvalidLaw, MonotonicityViolated, PreconditionError, TruncationDominates
from .reward import RewardFunction
from .stochastic import (LOG_CUTOFF, MCEstimate, JumpDistribution, PassageSample, SamplerLaw, _run_batches,
                         default_threads, first_passage_mc, jump_from_dict, mgf_root)

REGULAR, IRREGULAR = "Regular", "Irregular"
MAX_EVENTS = 10_000_000


@dataclass(frozen=True)
class LevyModel:
    drift: float = 0.0
    sigma: float = 0.0
    rate: float = 0.0
    jump: Optional[JumpDistribution] = None

    def __post_init__(self):
        # validates parameters and the P(X_1 > 0) > 0 assumption
        self.time1_law

    @property
    def time1_law(self) -> SamplerLaw:
        return step_law(self, 1.0)

    def psi(self, lam: float) -> float:
        """Laplace exponent: log E e^{lam X_1}."""
        return self.time1_law.log_mgf(lam)

    @property
    def mean(self) -> float:
        return self.time1_law.mean

    def to_dict(self) -> dict:
        d = {"drift": self.drift, "sigma": self.sigma}
        if self.rate > 0:
            d["jumps"] = {"rate": self.rate, "law": self.jump.to_dict()}
        return d

    @staticmethod
    def brownian(drift: float = 0.0, sigma: float = 1.0) -> "LevyModel":
        return LevyModel(drift, sigma)

    @staticmethod
    def poisson_minus_drift(rate: float, jump: float = 1.0, speed: float = 1.0) -> "LevyModel":
        """X_t = -speed*t + jump*N_t with N a Poisson process of the given rate."""
        return LevyModel(-speed, 0.0, rate, JumpDistribution.degenerate(jump))


def model_from_dict(d: dict) -> LevyModel:
    if d.get("mode") is not None or "atoms" in d:
        raise InvalidLaw("expected a Levy model (drift, sigma, jumps), got an increment law")
    if d.get("infinite_activity"):
        raise InvalidLaw("infinite-activity models are not supported: jump rate must be finite")
    jumps = d.get("jumps")
    if jumps:
        rate = float(jumps["rate"])
        if not math.isfinite(rate):
            raise InvalidLaw("infinite-activity models are not supported: jump rate must be finite")
        return LevyModel(float(d.get("drift", 0.0)), float(d.get("sigma", 0.0)), rate, jump_from_dict(jumps["law"]))
    return LevyModel(float(d.get("drift", 0.0)), float(d.get("sigma", 0.0)))


def step_law(model: LevyModel, dt: float) -> SamplerLaw:
    """Exact law of X_dt: Gaussian part plus a Poisson(rate*dt) number of jumps."""
    if not dt > 0:
        raise PreconditionError("dt must be positive")
    if model.rate == 0:
        return SamplerLaw(model.drift, model.sigma, 0.0, None, dt, "gaussian")
    return SamplerLaw(model.drift, model.sigma, model.rate, model.jump, dt)


def dyadic_law(model: LevyModel, level: int) -> SamplerLaw:
    if level < 0:
        raise PreconditionError("level must be >= 0")
    return step_law(model, 2.0 ** -level)


def regularity_of_zero(model: LevyModel) -> str:
    """Regular iff sigma > 0 or drift > 0 (finite jump activity)."""
    return REGULAR if (model.sigma > 0 or model.drift > 0) else IRREGULAR


# ---------------------------------------------------------------------------
# dyadic threshold sequence


@dataclass
class LevelResult:
    level: int
    regime: str
    u: Optional[float]
    tolerance: float
    se: float
    budget: int
    solution: solver.ThresholdSolution = field(repr=False, default=None)


@dataclass
class ThresholdSequence:
    levels: list
    extrapolated: float
    raw_last: float
    extrapolation_note: str = ""

    def to_rows(self) -> list:
        return [(r.level, r.u, r.tolerance) for r in self.levels]

    def to_dict(self) -> dict:
        def num(v):
            if v is None:
                return None
            return ("inf" if v > 0 else "-inf") if math.isinf(v) else float(v)

        return {
            "levels": [{"level": r.level, "regime": r.regime, "u": num(r.u), "tolerance": num(r.tolerance),
                        "se": num(r.se), "budget": r.budget} for r in self.levels],
            "extrapolated": num(self.extrapolated),
            "raw_last": num(self.raw_last),
            "note": self.extrapolation_note,
        }


def geometric_extrapolation(us: Sequence[float]) -> tuple[float, str]:
    """Limit of a sequence with geometric gaps, from its last three terms."""
    if len(us) < 3:
        return float(us[-1]), "fewer than three levels"
    d1, d2 = us[-2] - us[-3], us[-1] - us[-2]
    if 0 < d2 < d1:
        r = d2 / d1
        return float(us[-1] + d2 * r / (1 - r)), f"geometric gap ratio {r:.4g}"
    return float(us[-1]), "gaps not geometrically shrinking; last level reported"


def threshold_sequence(model: LevyModel, f: RewardFunction, q: float, ell_max: int, per_level_budget: int = 1 << 16,
                       seed: int = 0, tol: float = 1e-3, confidence: float = 0.99, ell_min: int = 0,
                       threads: Optional[int] = None, bracket=None, check: bool = True) -> ThresholdSequence:
    """Dyadic thresholds u_l for l = ell_min..ell_max with per-step discount q * 2^-l."""
    if ell_max < 2:
        raise PreconditionError("ell_max must be at least 2")
    z = _z(confidence)
    out = []
    for lvl in range(ell_min, ell_max + 1):
        dt = 2.0 ** -lvl
        law = step_law(model, dt)
        sol = solver.find_threshold(law, f, q * dt, bracket, tol, confidence, mode="mc", budget=per_level_budget,
                                    min_budget=min(1 << 14, per_level_budget), seed=seed + lvl, threads=threads,
                                    never_stop_levels=None if q * dt > 0 or law.mean < 0 else [4.0, 8.0, 16.0])
        se = _u_se(sol, z)
        out.append(LevelResult(lvl, sol.regime, sol.u, sol.tolerance, se, sol.budget, sol))
    if check:
        check_monotone(out)
    fin = [r.u for r in out if r.regime == solver.FINITE]
    if all(r.regime == solver.NEVER_STOP for r in out):
        return ThresholdSequence(out, math.inf, math.inf, "every level never stops")
    last = out[-1]
    if last.regime != solver.FINITE or len(fin) < 1:
        return ThresholdSequence(out, math.nan, math.nan, "last level not finite")
    tail = [r.u for r in out[-3:]] if all(r.regime == solver.FINITE for r in out[-3:]) else [last.u]
    ext, note = geometric_extrapolation(tail)
    return ThresholdSequence(out, ext, last.u, note)


def _z(confidence: float) -> float:
    from scipy.stats import norm
    return float(norm.ppf(0.5 + 0.5 * confidence))


def _u_se(sol: solver.ThresholdSolution, z: float) -> float:
    if sol.regime != solver.FINITE or sol.u_interval is None:
        return 0.0
    lo, hi = sol.u_interval
    return max(sol.u - lo, hi - sol.u, 0.0) / z


def check_monotone(levels: Sequence[LevelResult], nse: float = 4.0) -> None:
    """u_l must not decrease beyond ``nse`` combined standard errors (plus bisection tolerance)."""
    prev = None
    for r in levels:
        if r.regime == solver.STOP_EVERYWHERE:
            val = -math.inf
        elif r.regime == solver.NEVER_STOP:
            val = math.inf
        elif r.regime == solver.FINITE:
            val = r.u
        else:
            prev = None
            continue
        if prev is not None:
            pv, pse, ptol = prev
            if val == -math.inf and pv > -math.inf or (val < pv - nse * math.hypot(pse, r.se) - 1e-9
                                                        and math.isfinite(val)):
                raise MonotonicityViolated(
                    f"u at level {r.level} ({val:.6g}) fell below the previous level ({pv:.6g}) by more than "
                    f"{nse:g} standard errors")
            if math.isinf(pv) and pv > 0 and val < math.inf:
                raise MonotonicityViolated(f"level {r.level} is finite after a never-stop level")
        prev = (val, r.se, r.tolerance)


def value_at_level(model: LevyModel, f: RewardFunction, q: float, level: int, threshold: float, x: float,
                   budget: int = 200_000, seed: int = 0, threads: Optional[int] = None, bridge: bool = False,
                   control_variate: bool = False) -> MCEstimate:
    """Value of the dyadic threshold rule (stop at the first grid time with X >= threshold)."""
    if x >= threshold:
        return MCEstimate(float(f.eval(x)), 0.0, budget)
    dt = 2.0 ** -level
    law = step_law(model, dt)
    if bridge:
        return _bridge_value(model, f, q, dt, threshold, x, budget, seed, threads, control_variate)
    return first_passage_mc(law, f, q * dt, threshold, x, "tau", budget, seed, threads,
                            control_variate=control_variate, stream=(7, level))


def _bridge_value(model, f, q, dt, threshold, x, budget, seed, threads, control_variate):
    from .stochastic import estimate_from_sample, simulate_walk
    law = step_law(model, dt)
    s = simulate_walk(law, q * dt, x - threshold, 0, False, budget, seed, (8,), threads, bridge=True)
    est = estimate_from_sample(f, threshold, s, q * dt, x, control_variate)
    return est


# ---------------------------------------------------------------------------
# exact continuous-time passage (sigma = 0, drift <= 0, or creeping drift > 0)


def continuous_alpha(model: LevyModel, q: float) -> float:
    a = mgf_root(model.time1_law, q)
    if a is None:
        raise PreconditionError("no root of psi(lam) = q")
    if a <= 0 and q == 0:
        raise PreconditionError("q = 0 needs E X_1 < 0 for path abandonment")
    return a


def simulate_continuous(model: LevyModel, q: float, d0: float, strict: bool, n_paths: int, seed: int,
                        stream: tuple = (9,), threads: Optional[int] = None, backend: Optional[str] = None,
                        max_events: int = MAX_EVENTS) -> PassageSample:
    """Exact first passage above 0 of d0 + X_t for pure-jump models with drift (no Gaussian part)."""
    if model.sigma > 0:
        raise PreconditionError("exact continuous simulation needs sigma = 0")
    if model.rate == 0 and model.drift <= 0:
        raise PreconditionError("the model never moves up")
    k = _backend.get(backend)
    alpha = continuous_alpha(model, q)
    jfam, p0, p1, vals, cum = model.jump.kernel_args() if model.rate > 0 else (0, 0.0, 0.0, np.zeros(0), np.zeros(0))

    def fn(bg, m, t, o, s, lb):
        k.levy_passage(bg, m, float(d0), bool(strict), model.drift, model.rate, jfam, p0, p1, vals, cum,
                       float(q), alpha, LOG_CUTOFF, int(max_events), t, o, s, lb)

    threads = default_threads() if threads is None else threads
    t, o, s, lb = _run_batches(fn, n_paths, seed, stream, threads)
    return PassageSample(t, o, s, lb, alpha)


def strict_ladder_ratio(model: LevyModel, f: RewardFunction, q: float, n: int, seed: int,
                        threads: Optional[int] = None) -> solver.EmpiricalRatio:
    s = simulate_continuous(model, q, 0.0, True, n, seed, (10,), threads)
    return solver.EmpiricalRatio.from_sample(f, s, q)


def continuous_threshold(model: LevyModel, f: RewardFunction, q: float, tol: float = 1e-3,
                         confidence: float = 0.99, budget: int = 1 << 18, min_budget: int = 1 << 14, seed: int = 0,
                         threads: Optional[int] = None, bracket=None,
                         control_variate: bool = True) -> solver.ThresholdSolution:
    """Threshold from the strict ascending ladder of an irregular model.

    Uses rho'(x) = E[e^{-q tau_{0+}} g(x + X_{tau_{0+}}) 1{tau_{0+} < inf}] / g(x)
    whose crossing u' = inf{rho' <= 1} equals u.
    """
    if regularity_of_zero(model) != IRREGULAR:
        raise PreconditionError("the strict-ladder route needs 0 irregular for (0, inf)")

    def factory(n):
        return strict_ladder_ratio(model, f, q, n, seed, threads)

    sol = solver.find_threshold(model.time1_law, f, q, bracket, tol, confidence, mode="mc", budget=budget,
                                min_budget=min_budget, seed=seed, threads=threads, control_variate=control_variate,
                                ratio_factory=factory)
    return sol


def continuous_value(model: LevyModel, f: RewardFunction, q: float, threshold: float, x: float,
                     budget: int = 200_000, seed: int = 0, threads: Optional[int] = None,
                     control_variate: bool = False, check_truncation: bool = True) -> MCEstimate:
    """E_x[e^{-q tau} g(X_tau) 1{tau < inf}] with tau the first entry into [threshold, inf), exact in time."""
    from .stochastic import estimate_from_sample
    if x >= threshold:
        return MCEstimate(float(f.eval(x)), 0.0, budget)
    s = simulate_continuous(model, q, x - threshold, False, budget, seed, (11,), threads)
    est = estimate_from_sample(f, threshold, s, q, x, control_variate)
    if check_truncation and est.truncation_bound > 0.1 * abs(est.mean):
        raise TruncationDominates(f"truncation bound {est.truncation_bound:.3g} exceeds 10% of {est.mean:.3g}")
    return est
