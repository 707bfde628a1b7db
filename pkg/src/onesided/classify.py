"""Decide whether the optimal threshold is finite from moment generating function tests.

All tests compare E exp(lam * xi) with e^q at lam = beta (+ delta), where beta is
the asymptotic log-slope of the reward.  They are sufficient conditions with
an if-and-only-if form when the reward has a strict slope gap h'(x-) > beta,
max(q, beta) > 0 and the mgf is finite slightly beyond beta.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .reward import PowerPlus, RewardFunction, Scaled
from .stochastic import IncrementLaw, LatticeLaw

FINITE, INFINITE, INCONCLUSIVE = "Finite", "Infinite", "Inconclusive"
NOT_APPLICABLE = "notApplicable"

DELTA_GRID = tuple(2.0 ** -k for k in range(0, 21))


@dataclass
class FinitenessVerdict:
    verdict: str
    beta_used: float
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def _log_phi(law: IncrementLaw, lam: float) -> float:
    return law.log_mgf(lam)


def _mgf_finite_beyond(law: IncrementLaw, lam: float) -> bool:
    """True when the mgf is finite on [lam, lam + delta] for some delta > 0."""
    return lam < law.mgf_sup and math.isfinite(_log_phi(law, lam))


@dataclass
class SlopeGap:
    holds: bool
    analytic: bool
    min_gap: float


def slope_gap(f: RewardFunction, upto: float = 100.0, n: int = 2001) -> SlopeGap:
    """Check h'(x-) > beta: analytically when the reward kind knows, otherwise on a probe grid."""
    if f.strict_slope_gap is not None:
        return SlopeGap(bool(f.strict_slope_gap), True, math.nan)
    lo = f.x0 + 1e-6 if f.x0 > -math.inf else -upto
    xs = np.linspace(lo, upto, n)
    d = f.log_deriv_left(xs) - f.beta
    mg = float(np.min(d))
    return SlopeGap(mg > 0, False, mg)


def sufficient_finite(law: IncrementLaw, f: RewardFunction, q: float) -> dict:
    """First delta in {1, 1/2, ..., 2^-20} with E exp((beta+delta) xi) <= e^q."""
    beta = f.beta
    for d in DELTA_GRID:
        lam = beta + d
        if lam > law.mgf_sup:
            continue
        lp = _log_phi(law, lam)
        if math.isfinite(lp) and lp <= q:
            return {"result": True, "delta": d, "mgf": math.exp(lp), "exp_q": math.exp(q)}
    return {"result": False}


def sufficient_infinite(law: IncrementLaw, f: RewardFunction, q: float) -> dict:
    """E exp(beta xi) >= e^q under the slope-gap and max(q, beta) > 0 provisos."""
    beta = f.beta
    gap = slope_gap(f)
    if not gap.holds:
        return {"result": NOT_APPLICABLE, "reason": "slope gap h'(x-) > beta fails"}
    if not max(q, beta) > 0:
        return {"result": NOT_APPLICABLE, "reason": "max(q, beta) = 0"}
    lp = _log_phi(law, beta) if beta <= law.mgf_sup else math.inf
    return {"result": bool(lp >= q), "mgf": math.exp(lp) if lp < 709 else math.inf, "exp_q": math.exp(q),
            "gap_analytic": gap.analytic}


def _positive_moment_finite(law: IncrementLaw, power: float) -> bool:
    if isinstance(law, LatticeLaw) or law.mgf_sup > 0:
        return True
    j = law.jump
    if j is not None and j.family == "pareto":
        return j.params[0] > power
    return True


def _positive_moment(law: IncrementLaw, power: float, seed: int = 7) -> float:
    if isinstance(law, LatticeLaw):
        v = np.maximum(law.values, 0.0)
        return float(np.dot(v ** power, law.probs))
    x = law.sample(np.random.default_rng(seed), 200_000)
    return float(np.mean(np.maximum(x, 0.0) ** power))


def novikov_shiryaev(law: IncrementLaw, nu: float, q: float) -> dict:
    """Finite threshold for g = (x+)^nu from polynomial moments of the positive part."""
    if q > 0:
        if _positive_moment_finite(law, nu):
            return {"result": FINITE, "branch": "q>0", "moment": _positive_moment(law, nu), "power": nu}
        return {"result": NOT_APPLICABLE, "reason": f"E[(xi+)^{nu}] is infinite"}
    if law.mean < 0 and _positive_moment_finite(law, nu + 1):
        return {"result": FINITE, "branch": "q=0", "mean": law.mean, "moment": _positive_moment(law, nu + 1),
                "power": nu + 1}
    return {"result": NOT_APPLICABLE, "reason": "q = 0 needs E xi < 0 and E[(xi+)^(nu+1)] < inf"}


def novikov_shiryaev_condition(law: IncrementLaw, f: RewardFunction, q: float) -> dict:
    while isinstance(f, Scaled):  # c (x+)^nu has the same threshold
        f = f.base
    if not isinstance(f, PowerPlus):
        return {"result": NOT_APPLICABLE, "reason": "reward is not (x+)^nu"}
    return novikov_shiryaev(law, f.nu, q)


def light_tail_characterization(law: IncrementLaw, f: RewardFunction, q: float,
                                continuous_extension: bool = False) -> FinitenessVerdict:
    """Finite iff E exp(beta xi) < e^q when all provisos hold; otherwise the sufficient tests."""
    beta = float(f.beta)
    w: dict = {"continuous_time_extension": continuous_extension}
    mean = law.mean
    if math.isnan(mean):
        w["reason"] = "E xi undefined"
        return FinitenessVerdict(INCONCLUSIVE, beta, w)
    gap = slope_gap(f)
    w["slope_gap"] = {"holds": gap.holds, "analytic": gap.analytic}
    light = _mgf_finite_beyond(law, beta)
    w["light_tail"] = light
    if gap.holds and max(q, beta) > 0 and light:
        lp = _log_phi(law, beta)
        w.update(test="iff", mgf_at_beta=math.exp(lp), exp_q=math.exp(q))
        if lp < q:
            return FinitenessVerdict(FINITE, beta, w)
        if gap.analytic:
            return FinitenessVerdict(INFINITE, beta, w)
        w["reason"] = "slope gap confirmed on a probe grid only; leaning Infinite"
        return FinitenessVerdict(INCONCLUSIVE, beta, w)

    sf = sufficient_finite(law, f, q)
    if sf["result"]:
        w.update(test="sufficientFinite", **{k: v for k, v in sf.items() if k != "result"})
        return FinitenessVerdict(FINITE, beta, w)
    si = sufficient_infinite(law, f, q)
    if si["result"] is True:
        w.update(test="sufficientInfinite", mgf_at_beta=si["mgf"], exp_q=si["exp_q"])
        if si["gap_analytic"]:
            return FinitenessVerdict(INFINITE, beta, w)
        w["reason"] = "slope gap confirmed on a probe grid only; leaning Infinite"
        return FinitenessVerdict(INCONCLUSIVE, beta, w)
    ns = novikov_shiryaev_condition(law, f, q)
    if ns["result"] == FINITE:
        w.update(test="novikovShiryaev", **{k: v for k, v in ns.items() if k != "result"})
        return FinitenessVerdict(FINITE, beta, w)
    # q = 0, beta = 0: the walk reaches every level (E xi >= 0), so with g strictly
    # increasing waiting for a higher level always pays and u = inf.
    if q == 0 and beta == 0 and gap.holds and gap.analytic and mean >= 0:
        w.update(test="recurrence", mean=mean)
        return FinitenessVerdict(INFINITE, beta, w)
    w["reason"] = "no test applies"
    return FinitenessVerdict(INCONCLUSIVE, beta, w)


def classify(law: IncrementLaw, f: RewardFunction, q: float, continuous_extension: bool = False) -> dict:
    """All tests at once, for reports."""
    return {
        "lightTailCharacterization": light_tail_characterization(law, f, q, continuous_extension).to_dict(),
        "sufficientFinite": sufficient_finite(law, f, q),
        "sufficientInfinite": sufficient_infinite(law, f, q),
        "novikovShiryaev": novikov_shiryaev_condition(law, f, q),
    }
