"""Increment laws, moment generating functions and first-passage primitives.

Two law types are provided:

* :class:`LatticeLaw` - finite support on a lattice ``step * Z``.  First-passage
  functionals are computed exactly by solving a banded linear system.
* :class:`SamplerLaw` - one step of a jump-diffusion over a time step ``dt``:
  Gaussian part plus a compound Poisson sum of jumps.  Functionals are
  estimated by Monte Carlo with seeded batches.

Passage kinds: ``"T"`` is the first time n >= 1 with X_n >= level, ``"tau"`` the
first n >= 0 with X_n >= level and ``"tau+"`` the first n >= 0 with X_n > level.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import logsumexp

from . import _backend
from .errors import (DegenerateLaw, InvalidLaw, PreconditionError, TruncationDominates,
                     UnboundedExpectation)
from .reward import RewardFunction, sup_weighted

LOG_CUTOFF = math.log(1e14)
MAX_PATH_STEPS = 10_000_000
BATCH = 4096
Z_SKIP = 8.0
MAX_BLOCK = 1 << 20
BRIDGE_DEPTH = 6

PASSAGE_KINDS = ("T", "tau", "tau+")


# ---------------------------------------------------------------------------
# jump distributions


_JUMP_CODES = {"degenerate": 1, "uniform": 2, "exponential": 3, "normal": 4, "discrete": 5, "pareto": 6}


@dataclass(frozen=True)
class JumpDistribution:
    """Jump size law for compound Poisson parts.

    Families and parameters: degenerate(value), uniform(low, high),
    exponential(scale, shift=0), normal(mean, sd), discrete(values, probs),
    pareto(alpha, scale) - the last has no exponential moments.
    """

    family: str
    params: tuple = ()
    values: tuple = ()
    probs: tuple = ()

    def __post_init__(self):
        if self.family not in _JUMP_CODES:
            raise InvalidLaw(f"unknown jump family {self.family!r}")
        if self.family == "discrete":
            p = np.asarray(self.probs, dtype=float)
            if len(self.values) != len(p) or len(p) == 0 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
                raise InvalidLaw("discrete jumps need matching values and probabilities summing to 1")
        if self.family == "uniform" and not self.params[1] > self.params[0]:
            raise InvalidLaw("uniform jumps need high > low")
        if self.family in ("exponential", "pareto") and not self.params[0] > 0:
            raise InvalidLaw(f"{self.family} jumps need a positive first parameter")

    # constructors -------------------------------------------------------
    @staticmethod
    def degenerate(value: float) -> "JumpDistribution":
        return JumpDistribution("degenerate", (float(value), 0.0))

    @staticmethod
    def uniform(low: float, high: float) -> "JumpDistribution":
        return JumpDistribution("uniform", (float(low), float(high)))

    @staticmethod
    def exponential(scale: float, shift: float = 0.0) -> "JumpDistribution":
        return JumpDistribution("exponential", (float(scale), float(shift)))

    @staticmethod
    def normal(mean: float, sd: float) -> "JumpDistribution":
        return JumpDistribution("normal", (float(mean), float(sd)))

    @staticmethod
    def discrete(values: Sequence[float], probs: Sequence[float]) -> "JumpDistribution":
        return JumpDistribution("discrete", (), tuple(float(v) for v in values), tuple(float(p) for p in probs))

    @staticmethod
    def pareto(alpha: float, scale: float) -> "JumpDistribution":
        return JumpDistribution("pareto", (float(alpha), float(scale)))

    # moments ------------------------------------------------------------
    def log_mgf(self, lam: float) -> float:
        f, p = self.family, self.params
        if f == "degenerate":
            return lam * p[0]
        if f == "uniform":
            a, b = p
            if lam == 0:
                return 0.0
            # log((e^{lam b} - e^{lam a}) / (lam (b - a)))
            return lam * b + math.log(-math.expm1(lam * (a - b))) - math.log(lam * (b - a))
        if f == "exponential":
            s, c = p
            if lam * s >= 1:
                return math.inf
            return lam * c - math.log1p(-lam * s)
        if f == "normal":
            return lam * p[0] + 0.5 * lam * lam * p[1] ** 2
        if f == "discrete":
            return float(logsumexp(lam * np.asarray(self.values), b=np.asarray(self.probs)))
        if f == "pareto":
            return 0.0 if lam == 0 else math.inf
        raise AssertionError

    @property
    def mgf_sup(self) -> float:
        """Right end of {lam >= 0 : E e^{lam J} < inf} (open for exponential)."""
        if self.family == "exponential":
            return 1.0 / self.params[0]
        if self.family == "pareto":
            return 0.0
        return math.inf

    @property
    def mean(self) -> float:
        f, p = self.family, self.params
        if f == "degenerate":
            return p[0]
        if f == "uniform":
            return 0.5 * (p[0] + p[1])
        if f == "exponential":
            return p[0] + p[1]
        if f == "normal":
            return p[0]
        if f == "discrete":
            return float(np.dot(self.values, self.probs))
        if f == "pareto":
            a, s = p
            return a * s / (a - 1) if a > 1 else math.inf
        raise AssertionError

    @property
    def positive_mean(self) -> float:
        """E[max(J, 0)]."""
        f, p = self.family, self.params
        if f == "degenerate":
            return max(p[0], 0.0)
        if f == "uniform":
            a, b = p
            if a >= 0:
                return 0.5 * (a + b)
            if b <= 0:
                return 0.0
            return b * b / (2 * (b - a))
        if f == "exponential":
            s, c = p
            if c >= 0:
                return s + c
            return s * math.exp(c / s)  # E[(c + sE)^+] for c < 0
        if f == "normal":
            from scipy.stats import norm
            m, s = p
            if s == 0:
                return max(m, 0.0)
            return m * norm.cdf(m / s) + s * norm.pdf(m / s)
        if f == "discrete":
            return float(np.dot(np.maximum(self.values, 0.0), self.probs))
        if f == "pareto":
            return self.mean
        raise AssertionError

    @property
    def sup(self) -> float:
        """Supremum of the support."""
        f, p = self.family, self.params
        if f == "degenerate":
            return p[0]
        if f == "uniform":
            return p[1]
        if f == "discrete":
            return max(v for v, q in zip(self.values, self.probs) if q > 0)
        if f == "normal" and p[1] == 0:
            return p[0]
        return math.inf

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        k = _backend.get("python")
        vals, cum = self.kernel_arrays()
        return k._draw_jumps(rng, _JUMP_CODES[self.family], *self._kp(), vals, cum, size)

    def _kp(self):
        p = tuple(self.params) + (0.0, 0.0)
        return float(p[0]), float(p[1])

    def kernel_arrays(self):
        if self.family == "discrete":
            v = np.asarray(self.values, dtype=float)
            c = np.cumsum(np.asarray(self.probs, dtype=float))
            c[-1] = 1.0
            return v, c
        return np.zeros(0), np.zeros(0)

    def kernel_args(self):
        vals, cum = self.kernel_arrays()
        p0, p1 = self._kp()
        return _JUMP_CODES[self.family], p0, p1, vals, cum

    def to_dict(self) -> dict:
        f, p = self.family, self.params
        if f == "degenerate":
            return {"family": f, "value": p[0]}
        if f == "uniform":
            return {"family": f, "low": p[0], "high": p[1]}
        if f == "exponential":
            return {"family": f, "scale": p[0], "shift": p[1]}
        if f == "normal":
            return {"family": f, "mean": p[0], "sd": p[1]}
        if f == "discrete":
            return {"family": f, "values": list(self.values), "probs": list(self.probs)}
        return {"family": f, "alpha": p[0], "scale": p[1]}


def jump_from_dict(d: dict) -> JumpDistribution:
    f = d.get("family")
    try:
        if f == "degenerate":
            return JumpDistribution.degenerate(d["value"])
        if f == "uniform":
            return JumpDistribution.uniform(d["low"], d["high"])
        if f == "exponential":
            return JumpDistribution.exponential(d["scale"], d.get("shift", 0.0))
        if f == "normal":
            return JumpDistribution.normal(d["mean"], d["sd"])
        if f == "discrete":
            return JumpDistribution.discrete(d["values"], d["probs"])
        if f == "pareto":
            return JumpDistribution.pareto(d["alpha"], d["scale"])
    except KeyError as exc:
        raise InvalidLaw(f"jump family {f!r} is missing parameter {exc}") from None
    raise InvalidLaw(f"unknown jump family {f!r}")


# ---------------------------------------------------------------------------
# increment laws


class IncrementLaw:
    mode = "abstract"

    def log_mgf(self, lam: float) -> float:
        raise NotImplementedError

    @property
    def mgf_sup(self) -> float:
        raise NotImplementedError

    @property
    def mean(self) -> float:
        raise NotImplementedError


class LatticeLaw(IncrementLaw):
    """Finite-support law on ``step * Z``.

    Parameters
    ----------
    step : float
        Lattice spacing h > 0.
    atoms : sequence of (value, probability)
        Values must be integer multiples of ``step``.
    """

    mode = "lattice"

    def __init__(self, step: float, atoms: Sequence[Sequence[float]]):
        step = float(step)
        if not step > 0:
            raise InvalidLaw("lattice step must be positive")
        vals = np.array([float(a[0]) for a in atoms])
        probs = np.array([float(a[1]) for a in atoms])
        if vals.size == 0:
            raise InvalidLaw("lattice law needs at least one atom")
        if np.any(probs < 0):
            raise InvalidLaw("probabilities must be nonnegative")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise InvalidLaw(f"probabilities sum to {probs.sum()!r}, not 1")
        ks = np.rint(vals / step)
        if np.any(np.abs(ks * step - vals) > 1e-9 * np.maximum(1.0, np.abs(vals))):
            raise InvalidLaw("atoms must be integer multiples of the step")
        ks = ks.astype(np.int64)
        keep = probs > 0
        ks, probs = ks[keep], probs[keep]
        uk, inv = np.unique(ks, return_inverse=True)
        pk = np.bincount(inv, weights=probs)
        if not np.any(uk > 0):
            raise DegenerateLaw("P(increment > 0) must be positive")
        self.step = step
        self.offsets = uk  # integer multiples of step
        self.probs = pk / pk.sum()
        g = int(np.gcd.reduce(np.abs(uk[uk != 0]))) if np.any(uk != 0) else 1
        self._g = max(g, 1)

    # reduced representation used by the exact solver
    @property
    def unit(self) -> float:
        return self.step * self._g

    @property
    def ks(self) -> np.ndarray:
        return self.offsets // self._g

    @property
    def values(self) -> np.ndarray:
        return self.offsets * self.step

    @property
    def atoms(self) -> list:
        return [[float(v), float(p)] for v, p in zip(self.values, self.probs)]

    @property
    def mean(self) -> float:
        return float(np.dot(self.values, self.probs))

    @property
    def up_mass(self) -> float:
        return float(self.probs[self.offsets > 0].sum())

    @property
    def max_up(self) -> float:
        return float(self.values.max())

    @property
    def max_down(self) -> float:
        return float(max(-self.values.min(), 0.0))

    @property
    def mgf_sup(self) -> float:
        return math.inf

    def log_mgf(self, lam: float) -> float:
        return float(logsumexp(lam * self.values, b=self.probs))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return rng.choice(self.values, size=size, p=self.probs)

    def key(self) -> tuple:
        return ("lattice", self.step, tuple(self.offsets.tolist()), tuple(self.probs.tolist()))

    def __eq__(self, other):
        return isinstance(other, LatticeLaw) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def to_dict(self) -> dict:
        return {"mode": "lattice", "step": self.step, "atoms": self.atoms}

    def __repr__(self):
        return f"LatticeLaw(step={self.step}, atoms={self.atoms})"


@dataclass(frozen=True)
class SamplerLaw(IncrementLaw):
    """One step X_dt of drift*t + sigma*B_t + compound Poisson(rate, jump)."""

    drift: float = 0.0
    sigma: float = 0.0
    rate: float = 0.0
    jump: Optional[JumpDistribution] = None
    dt: float = 1.0
    family: str = "jump_diffusion"
    declared_mgf_sup: Optional[float] = None
    mode = "sampler"

    def __post_init__(self):
        if self.sigma < 0 or self.rate < 0 or not self.dt > 0:
            raise InvalidLaw("need sigma >= 0, rate >= 0, dt > 0")
        if self.rate > 0 and self.jump is None:
            raise InvalidLaw("a positive jump rate needs a jump distribution")
        if not math.isfinite(self.rate):
            raise InvalidLaw("infinite jump activity is not supported")
        if not self.has_up_mass:
            raise DegenerateLaw("P(increment > 0) must be positive")

    @property
    def has_up_mass(self) -> bool:
        if self.sigma > 0 or self.drift > 0:
            return True
        return self.rate > 0 and self.jump is not None and self.jump.sup > 0

    @property
    def mean(self) -> float:
        jm = self.jump.mean if (self.rate > 0 and self.jump is not None) else 0.0
        return self.dt * (self.drift + self.rate * jm)

    @property
    def mgf_sup(self) -> float:
        s = self.jump.mgf_sup if (self.rate > 0 and self.jump is not None) else math.inf
        if self.declared_mgf_sup is not None:
            s = min(s, self.declared_mgf_sup)
        return s

    def log_mgf(self, lam: float) -> float:
        if lam > self.mgf_sup or (lam == self.mgf_sup and self.jump is not None and self.jump.family == "exponential"):
            return math.inf
        v = self.drift * lam + 0.5 * self.sigma ** 2 * lam * lam
        if self.rate > 0:
            lj = self.jump.log_mgf(lam)
            if not math.isfinite(lj):
                return math.inf
            v += self.rate * math.expm1(lj)
        return self.dt * v

    @property
    def positive_jump_mean(self) -> float:
        return self.jump.positive_mean if (self.rate > 0 and self.jump is not None) else 0.0

    @property
    def up_mass(self) -> float:
        """P(step > 0); exact without jumps, otherwise a fixed-seed estimate."""
        if self.rate == 0:
            if self.sigma == 0:
                return 1.0 if self.drift > 0 else 0.0
            from scipy.stats import norm
            return float(norm.cdf(self.drift * math.sqrt(self.dt) / self.sigma))
        x = self.sample(np.random.default_rng(12345), 100_000)
        return float(np.mean(x > 0))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        size = int(size)
        x = self.drift * self.dt + self.sigma * math.sqrt(self.dt) * rng.standard_normal(size)
        if self.rate > 0:
            nj = rng.poisson(self.rate * self.dt, size)
            tot = int(nj.sum())
            j = self.jump.sample(rng, tot)
            idx = np.repeat(np.arange(size), nj)
            x += np.bincount(idx, weights=j, minlength=size)
        return x

    def with_dt(self, dt: float) -> "SamplerLaw":
        return SamplerLaw(self.drift, self.sigma, self.rate, self.jump, dt, self.family, self.declared_mgf_sup)

    def to_dict(self) -> dict:
        d = {"mode": "sampler", "family": self.family}
        if self.family == "gaussian":
            d.update(mean=self.drift * self.dt, sd=self.sigma * math.sqrt(self.dt))
        else:
            d.update(drift=self.drift, sigma=self.sigma, dt=self.dt)
            if self.rate > 0:
                d["jumps"] = {"rate": self.rate, "law": self.jump.to_dict()}
        if self.declared_mgf_sup is not None:
            d["mgf_domain"] = [0.0, self.declared_mgf_sup]
        return d


def gaussian_law(mean: float, sd: float) -> SamplerLaw:
    return SamplerLaw(drift=mean, sigma=sd, family="gaussian")


def law_from_dict(d: dict) -> IncrementLaw:
    mode = d.get("mode")
    if mode == "lattice":
        return LatticeLaw(d["step"], d["atoms"])
    if mode == "sampler":
        fam = d.get("family", "jump_diffusion")
        dom = d.get("mgf_domain")
        sup = float(dom[1]) if dom is not None else None
        if fam == "gaussian":
            return SamplerLaw(drift=float(d["mean"]), sigma=float(d["sd"]), family="gaussian", declared_mgf_sup=sup)
        jumps = d.get("jumps")
        rate, jl = (float(jumps["rate"]), jump_from_dict(jumps["law"])) if jumps else (0.0, None)
        return SamplerLaw(float(d.get("drift", 0.0)), float(d.get("sigma", 0.0)), rate, jl,
                          float(d.get("dt", 1.0)), fam, sup)
    raise InvalidLaw(f"unknown law mode {mode!r}")


# ---------------------------------------------------------------------------
# mgf and its root


def log_mgf(law: IncrementLaw, lam: float) -> float:
    if lam < 0:
        raise InvalidLaw("the mgf is only evaluated at lam >= 0")
    return law.log_mgf(float(lam))


def mgf(law: IncrementLaw, lam: float) -> float:
    """E exp(lam * xi); ``inf`` outside the finiteness domain."""
    v = log_mgf(law, lam)
    return math.exp(v) if v < 709.0 else math.inf


def mgf_root(law: IncrementLaw, q: float, tol: float = 1e-10) -> Optional[float]:
    """Largest lam >= 0 with mgf(lam) = e^q, or None when no root exists in the domain.

    log mgf is convex with value 0 at lam = 0, so {lam : log mgf(lam) <= q} is an
    interval containing 0 and its right end is found by bisection.
    """
    if q < 0:
        raise InvalidLaw("q must be nonnegative")
    psi = lambda lam: law.log_mgf(lam) - q  # noqa: E731
    sup = law.mgf_sup
    lo = 0.0
    hi = None
    if sup == 0:
        return 0.0 if q == 0 and not law.mean < 0 else None
    lam = min(1.0, 0.5 * sup) if math.isfinite(sup) else 1.0
    for _ in range(2000):
        v = psi(lam)
        if v > 0:
            hi = lam
            break
        lo = lam
        if math.isfinite(sup):
            nxt = lam + 0.5 * (sup - lam)
            if nxt - lam < 1e-13 * max(1.0, sup):
                return None
            lam = nxt
        else:
            lam *= 2.0
            if lam > 1e12:
                return None
    if hi is None:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if psi(mid) <= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi) if lo > 0 or psi(tol) <= 0 else lo


def truncate_jumps(law: IncrementLaw, k: float) -> LatticeLaw:
    """Law of min(xi, k); mass above k collapses onto the atom k."""
    if not isinstance(law, LatticeLaw):
        raise InvalidLaw("jump truncation is implemented for lattice laws only")
    if not k > 0:
        raise DegenerateLaw("min(xi, k) has no positive mass for k <= 0")
    kk = k / law.step
    if abs(kk - round(kk)) > 1e-9 * max(1.0, abs(kk)):
        raise InvalidLaw("k must be a multiple of the lattice step")
    v = np.minimum(law.values, round(kk) * law.step)
    return LatticeLaw(law.step, list(zip(v, law.probs)))


# ---------------------------------------------------------------------------
# exact lattice first passage


class _LatticeEngine:
    """Discounted landing distributions for a lattice walk.

    ``landing(j)[r]`` is E[e^{-q tau} 1{X_tau = (j + r) units}] for the walk
    started j units below the level (j >= 1), r = 0..m-1, where tau is the
    first entry into [level, inf).  The system is banded and closed at depth D
    by the geometric tail A_{D+s} = w^s A_D with w = exp(-alpha * unit);
    D is doubled until the requested rows agree to 1e-13.
    """

    def __init__(self, law: LatticeLaw, q: float):
        self.law = law
        self.q = float(q)
        self.ks = law.ks.astype(np.int64)
        self.p = law.probs
        self.m = int(self.ks.max())
        self.dn = int(max(-self.ks.min(), 0))
        alpha = mgf_root(law, q)
        if alpha is None:
            raise UnboundedExpectation("no root of the mgf equation: discounted passage values are unbounded")
        self.alpha = alpha
        self.w = math.exp(-alpha * law.unit)
        self._A = np.zeros((1, self.m))
        self._depth = 0

    def _solve(self, D: int) -> np.ndarray:
        m, dn, disc = self.m, self.dn, math.exp(-self.q)
        lo_bw, up_bw = m, max(dn, 1)
        ab = np.zeros((lo_bw + up_bw + 1, D))
        rhs = np.zeros((D, m))
        rows = np.arange(1, D + 1)
        ab[up_bw, :] = 1.0
        for k, p in zip(self.ks, self.p):
            c = disc * p
            if k >= 1:
                # rows j <= k land directly at overshoot k - j
                jj = rows[rows <= k]
                rhs[jj - 1, k - jj] += c
                jj = rows[rows > k]
                t = jj - k
            else:
                jj = rows
                t = jj - k
            inside = t <= D
            ji, ti = jj[inside], t[inside]
            ab[up_bw + ji - ti, ti - 1] -= c
            jo, to = jj[~inside], t[~inside]
            if jo.size:
                ab[up_bw + jo - D, D - 1] -= c * self.w ** (to - D)
        return solve_banded((lo_bw, up_bw), ab, rhs, check_finite=False)

    def landing(self, jmax: int) -> np.ndarray:
        """Rows 0..jmax (row 0 unused) of the landing matrix."""
        jmax = max(int(jmax), self.dn, 1)
        if self._depth and jmax <= self._ok_rows:
            return self._A
        D = max(64, 8 * (self.m + self.dn), 2 * jmax)
        prev = self._solve(D)
        while True:
            D2 = 2 * D
            cur = self._solve(D2)
            r = jmax
            diff = np.max(np.abs(cur[:r] - prev[:r]))
            if diff <= 1e-13 * max(1.0, np.max(np.abs(cur[:r]))) or D2 > 1 << 22:
                break
            D, prev = D2, cur
        A = np.vstack([np.zeros((1, self.m)), cur])
        np.maximum(A, 0.0, out=A)
        self._A, self._depth, self._ok_rows = A, D2, jmax
        return A

    def ladder(self) -> np.ndarray:
        """a[r] = E[e^{-q T} 1{X_T = r units}], T = first n >= 1 with X_n >= 0, r = 0..m."""
        A = self.landing(self.dn)
        disc = math.exp(-self.q)
        a = np.zeros(self.m + 1)
        for k, p in zip(self.ks, self.p):
            if k >= 0:
                a[k] += disc * p
            else:
                a[: self.m] += disc * p * A[-k]
        return a


@lru_cache(maxsize=64)
def _engine(law: LatticeLaw, q: float) -> _LatticeEngine:
    return _LatticeEngine(law, q)


def lattice_engine(law: LatticeLaw, q: float) -> _LatticeEngine:
    return _engine(law, float(q))


def _gap_units(gap: float, unit: float, strict: bool) -> int:
    """Number of units the walk must climb to enter [gap, inf) (or (gap, inf))."""
    z = gap / unit
    zr = round(z)
    if abs(z - zr) <= 1e-9 * max(1.0, abs(z)):
        return int(zr) + (1 if strict else 0)
    return int(math.floor(z)) + 1


def _log_tau_values(law: LatticeLaw, f: RewardFunction, q: float, level: float, starts: np.ndarray,
                    strict: bool = False) -> np.ndarray:
    """log E_s[e^{-q tau} g(X_tau) 1{tau < inf}] for an array of starts."""
    starts = np.asarray(starts, dtype=float)
    out = np.empty(starts.shape)
    unit = law.unit
    js = np.array([_gap_units(level - s, unit, strict) for s in starts.ravel()]).reshape(starts.shape)
    now = js <= 0
    out[now] = f._h(starts[now])
    if np.any(~now):
        eng = lattice_engine(law, q)
        A = eng.landing(int(js[~now].max()))
        r = np.arange(eng.m)
        s = starts[~now]
        j = js[~now]
        pos = s[:, None] + (j[:, None] + r[None, :]) * unit
        hv = f._h(pos)
        w = A[j]
        with np.errstate(divide="ignore"):
            out[~now] = logsumexp(hv, b=w, axis=1)
    return out


def first_passage_exact(law: LatticeLaw, f: RewardFunction, q: float, level: float, start: float,
                        kind: str = "T") -> float:
    """E_start[e^{-q passage} g(X_passage) 1{passage < inf}] on a lattice, exact to solver precision."""
    if not isinstance(law, LatticeLaw):
        raise PreconditionError("exact first passage needs a lattice law")
    if kind not in PASSAGE_KINDS:
        raise ValueError(f"kind must be one of {PASSAGE_KINDS}")
    if kind in ("tau", "tau+"):
        v = _log_tau_values(law, f, q, level, np.array([start]), strict=(kind == "tau+"))[0]
    else:
        nxt = start + law.values
        lv = _log_tau_values(law, f, q, level, nxt)
        v = logsumexp(lv, b=law.probs) - q if np.any(np.isfinite(lv)) else -math.inf
    if math.isnan(v):
        raise UnboundedExpectation("non-finite reward inside the overshoot window")
    return math.exp(v) if v < 709 else math.inf


def ladder_vector(law: LatticeLaw, q: float) -> np.ndarray:
    """Discounted weak ladder height distribution in units of ``law.unit``."""
    return lattice_engine(law, q).ladder()


# ---------------------------------------------------------------------------
# Monte Carlo


def default_threads() -> int:
    env = os.environ.get("ONESIDED_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


@dataclass
class PassageSample:
    """Raw per-path output.  ``time`` is in steps (walks) or time units (continuous)."""

    time: np.ndarray
    over: np.ndarray
    status: np.ndarray
    logb: np.ndarray
    alpha: float

    @property
    def n(self) -> int:
        return int(self.time.size)

    @property
    def passed(self) -> np.ndarray:
        return self.status == 0


def _batch_sizes(n: int) -> list[int]:
    if n <= BATCH:
        return [n]
    full, rem = divmod(n, BATCH)
    return [BATCH] * full + ([rem] if rem else [])


def _run_batches(fn, n: int, seed: int, stream: tuple, threads: int):
    sizes = _batch_sizes(n)

    def one(b):
        ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(stream) + (b,))
        bg = np.random.PCG64(ss)
        m = sizes[b]
        out = (np.empty(m), np.empty(m), np.empty(m, dtype=np.int8), np.empty(m))
        fn(bg, m, *out)
        return out

    threads = max(1, int(threads))
    if threads == 1 or len(sizes) == 1:
        parts = [one(b) for b in range(len(sizes))]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, range(len(sizes))))
    return tuple(np.concatenate([p[i] for p in parts]) for i in range(4))


def abandonment_rate(law: IncrementLaw, q: float, allow_no_drift: bool = False) -> float:
    """Exponential rate alpha used to abandon paths far below the level."""
    alpha = mgf_root(law, q)
    if alpha is None:
        raise UnboundedExpectation("mgf never reaches e^q: no exponential bound for abandoned paths")
    if alpha <= 0 and q == 0 and not allow_no_drift:
        raise PreconditionError("q = 0 needs a verified negative drift (E xi < 0) or allow_no_drift=True")
    return alpha


def simulate_walk(law: IncrementLaw, q: float, d0: float, n_min: int, strict: bool, n_paths: int, seed: int,
                  stream: tuple = (0,), threads: Optional[int] = None, bridge: bool = False,
                  allow_no_drift: bool = False, backend: Optional[str] = None,
                  max_steps: int = MAX_PATH_STEPS) -> PassageSample:
    """Simulate first passage of the walk started at d0 (relative to the level)."""
    if n_paths < 1:
        raise PreconditionError("budget must be at least 1")
    k = _backend.get(backend)
    alpha = abandonment_rate(law, q, allow_no_drift)
    threads = default_threads() if threads is None else threads
    if isinstance(law, LatticeLaw):
        vals = law.values.astype(float)
        cum = np.cumsum(law.probs)
        cum[-1] = 1.0
        pr = law.probs.astype(float)

        def fn(bg, m, t, o, s, lb):
            k.walk_passage(bg, m, float(d0), int(n_min), bool(strict), 1, 1.0, 0.0, 0.0, 0.0,
                           5, 0.0, 0.0, vals, cum, pr, 0.0, law.max_up,
                           float(q), alpha, LOG_CUTOFF, int(max_steps), False, BRIDGE_DEPTH, Z_SKIP, MAX_BLOCK,
                           t, o, s, lb)
    else:
        jfam, p0, p1, vals, cum = law.jump.kernel_args() if (law.rate > 0) else (0, 0.0, 0.0, np.zeros(0), np.zeros(0))

        def fn(bg, m, t, o, s, lb):
            k.walk_passage(bg, m, float(d0), int(n_min), bool(strict), 0, law.dt, law.drift, law.sigma, law.rate,
                           jfam, p0, p1, vals, cum, np.zeros(0), law.positive_jump_mean, 0.0,
                           float(q), alpha, LOG_CUTOFF, int(max_steps), bool(bridge), BRIDGE_DEPTH, Z_SKIP, MAX_BLOCK,
                           t, o, s, lb)

    t, o, s, lb = _run_batches(fn, n_paths, seed, stream, threads)
    return PassageSample(t, o, s, lb, alpha)


@dataclass
class MCEstimate:
    mean: float
    se: float
    n: int
    truncation_bound: float = 0.0
    reliable: bool = True
    cv_coefficient: float = 0.0

    def to_dict(self) -> dict:
        return {"mean": self.mean, "se": self.se, "n": self.n, "truncation_bound": self.truncation_bound,
                "reliable": self.reliable}


def truncation_bound(f: RewardFunction, level: float, sample: PassageSample, q: float) -> float:
    """Upper bound on the expected reward lost by abandoned or capped paths."""
    lost = ~sample.passed
    if not np.any(lost):
        return 0.0
    logS = sup_weighted(f, level, sample.alpha)
    if not math.isfinite(logS):
        return math.inf
    return float(np.exp(logS - sample.logb[lost]).sum() / sample.n)


def estimate_from_sample(f: RewardFunction, level: float, sample: PassageSample, q: float, start: float,
                         control_variate: bool | float = False) -> MCEstimate:
    """Average e^{-q t} g(X) over passed paths; optional exponential-martingale control variate.

    With alpha the mgf root, Y = e^{-q t + alpha (X - start)} 1{passed} has mean 1
    (the stopped martingale is bounded before passage), so mean(Z) - c (mean(Y) - 1)
    is unbiased for any fixed c.  ``control_variate=True`` uses the regression
    coefficient; a number fixes c.
    """
    ok = sample.passed
    z = np.zeros(sample.n)
    x = level + sample.over[ok]
    with np.errstate(over="ignore"):
        z[ok] = np.exp(-q * sample.time[ok] + f._h(x))
    c = 0.0
    if control_variate is not False and sample.alpha is not None:
        y = np.zeros(sample.n)
        y[ok] = np.exp(-q * sample.time[ok] + sample.alpha * (x - start))
        if control_variate is True:
            vy = y.var()
            c = float(np.cov(z, y, bias=True)[0, 1] / vy) if vy > 0 else 0.0
        else:
            c = float(control_variate)
        z = z - c * (y - 1.0)
    n = sample.n
    mean = float(z.mean())
    se = float(z.std(ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    tb = truncation_bound(f, level, sample, q)
    return MCEstimate(mean, se, n, tb, reliable=n > 1, cv_coefficient=c)


def _kind_args(kind: str, start: float, level: float):
    if kind == "T":
        return start - level, 1, False
    if kind == "tau":
        return start - level, 0, False
    if kind == "tau+":
        return start - level, 0, True
    raise ValueError(f"kind must be one of {PASSAGE_KINDS}")


def first_passage_mc(law: IncrementLaw, f: RewardFunction, q: float, level: float, start: float, kind: str = "T",
                     budget: int = 100_000, seed: int = 0, threads: Optional[int] = None,
                     control_variate: bool = False, allow_no_drift: bool = False, stream: tuple = (1,),
                     backend: Optional[str] = None, check_truncation: bool = True) -> MCEstimate:
    """Monte Carlo version of :func:`first_passage_exact`; works for every law."""
    if budget < 1:
        raise PreconditionError("budget must be at least 1")
    d0, n_min, strict = _kind_args(kind, start, level)
    if n_min == 0 and (d0 > 0 or (d0 == 0 and not strict)):
        return MCEstimate(float(f.eval(start)), 0.0, budget)
    s = simulate_walk(law, q, d0, n_min, strict, budget, seed, stream, threads,
                      allow_no_drift=allow_no_drift, backend=backend)
    est = estimate_from_sample(f, level, s, q, start, control_variate)
    if budget == 1:
        est.reliable = False
    if check_truncation and est.truncation_bound > 0.1 * abs(est.mean):
        raise TruncationDominates(
            f"truncation bound {est.truncation_bound:.3g} exceeds 10% of the estimate {est.mean:.3g}")
    return est


def ladder_sample(law: IncrementLaw, q: float, n_paths: int, seed: int, threads: Optional[int] = None,
                  allow_no_drift: bool = False, stream: tuple = (2,), backend: Optional[str] = None) -> PassageSample:
    """Weak ascending ladder epochs (T_0, X_{T_0}) of the walk started at 0."""
    return simulate_walk(law, q, 0.0, 1, False, n_paths, seed, stream, threads,
                         allow_no_drift=allow_no_drift, backend=backend)


def expected_maximum(law: IncrementLaw, budget: int = 200_000, seed: int = 0,
                     threads: Optional[int] = None) -> Union[float, MCEstimate]:
    """E sup{0, X_1, X_2, ...} via the ladder decomposition M = (X_T + M') 1{T < inf}.

    Exact for lattice laws; for sampler laws returns an :class:`MCEstimate`.
    Returns inf when E xi >= 0.
    """
    if law.mean >= 0:
        return math.inf
    if isinstance(law, LatticeLaw):
        a = ladder_vector(law, 0.0)
        p = a.sum()
        if p >= 1 - 1e-15:
            return math.inf
        return float(np.dot(np.arange(a.size) * law.unit, a) / (1 - p))
    s = ladder_sample(law, 0.0, budget, seed, threads, stream=(3,))
    ok = s.passed.astype(float)
    h = np.where(s.passed, s.over, 0.0)
    p, mh = ok.mean(), h.mean()
    em = mh / (1 - p)
    # delta method for mh / (1 - p)
    n = s.n
    grad = np.array([1 / (1 - p), mh / (1 - p) ** 2])
    cov = np.cov(np.vstack([h, ok])) / n
    se = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
    return MCEstimate(float(em), se, n, truncation_bound=0.0)
