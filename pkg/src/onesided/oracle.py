"""Brute-force dynamic programming check of the threshold solution on lattice grids.

Value iteration V_{n+1}(x) = max(g(x), e^{-q} E V_n(x + xi)) starts from V_0 = g
on a finite lattice grid.  Above the grid the walk is stopped (V = g there);
below it the continuation value is either clamped to g or extrapolated
geometrically with the mgf root alpha, V(x) = e^{alpha (x - lo)} V(lo), which is
the decay rate of first-passage values far below the threshold.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import GridTooNarrow, PreconditionError
from .reward import RewardFunction
from .stochastic import LatticeLaw, mgf_root

CLAMP, GEOMETRIC = "clampToReward", "geometricExtrapolation"
STOP_RTOL = 1e-8


@dataclass
class DpResult:
    grid: np.ndarray
    values: np.ndarray
    rewards: np.ndarray
    iterations: int
    residual: float
    converged: bool
    boundary: str
    boundary_rate: Optional[float] = None
    touches_lower: bool = False

    @property
    def stopping(self) -> np.ndarray:
        # Stopping points satisfy V == g exactly (V is a max with g), so a relative
        # tolerance suffices; an absolute one would flag far-left points where
        # both values have underflowed towards zero.
        return (self.rewards > 0) & (self.values <= self.rewards * (1 + STOP_RTOL))

    @property
    def stopping_set(self) -> np.ndarray:
        return self.grid[self.stopping]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "g", "V", "inStoppingSet"])
        for x, g, v, s in zip(self.grid, self.rewards, self.values, self.stopping):
            w.writerow([repr(float(x)), repr(float(g)), repr(float(v)), int(s)])
        return buf.getvalue()


def lattice_grid(law: LatticeLaw, lo: float, hi: float) -> np.ndarray:
    """Points lo + k * unit in [lo, hi]."""
    n = int(math.floor((hi - lo) / law.unit + 1e-9))
    return lo + law.unit * np.arange(n + 1)


def value_iteration(law: LatticeLaw, f: RewardFunction, q: float, grid: Sequence[float],
                    boundary: str = GEOMETRIC, rate: Optional[float] = None, max_iter: int = 100_000,
                    tol: float = 1e-10, allow_boundary_stop: bool = False,
                    allow_nonnegative_drift: bool = False) -> DpResult:
    """Bellman recursion on the lattice grid spanning ``grid = (lo, hi)``.

    ``rate`` overrides the geometric extrapolation rate (default: mgf root at q).
    Stops when the largest pointwise relative change drops below ``tol``.
    """
    if not isinstance(law, LatticeLaw):
        raise PreconditionError("value iteration needs a lattice law")
    if q == 0 and law.mean >= 0 and not allow_nonnegative_drift:
        raise PreconditionError("q = 0 needs E xi < 0 for value iteration to converge")
    lo, hi = float(grid[0]), float(grid[-1]) if len(grid) > 1 else float(grid[0])
    xs = lattice_grid(law, lo, hi)
    n = xs.size
    ks = law.ks
    g = np.asarray(f.eval(xs), dtype=float)
    ext_hi = int(ks.max())
    ext_lo = int(max(-ks.min(), 0))
    above = np.asarray(f.eval(xs[-1] + law.unit * np.arange(1, ext_hi + 1)), dtype=float)
    if boundary == GEOMETRIC:
        a = mgf_root(law, q) if rate is None else float(rate)
        if a is None:
            raise PreconditionError("no mgf root for the geometric boundary")
        below_w = np.exp(-a * law.unit * np.arange(ext_lo, 0, -1))  # e^{alpha (x - lo)} for x = lo - ext_lo..lo-1
    elif boundary == CLAMP:
        a = None
        below_g = np.asarray(f.eval(xs[0] - law.unit * np.arange(ext_lo, 0, -1)), dtype=float)
    else:
        raise ValueError(f"unknown boundary {boundary!r}")
    disc = math.exp(-q)
    V = g.copy()
    it, res = 0, math.inf
    ext = np.empty(ext_lo + n + ext_hi)
    ext[ext_lo + n:] = above
    conv = False
    while it < max_iter:
        ext[ext_lo:ext_lo + n] = V
        if ext_lo:
            ext[:ext_lo] = below_w * V[0] if boundary == GEOMETRIC else below_g
        cont = np.zeros(n)
        for k, p in zip(ks, law.probs):
            cont += p * ext[ext_lo + k: ext_lo + k + n]
        Vn = np.maximum(g, disc * cont)
        it += 1
        pos = Vn > 0
        res = float(np.max(np.abs(Vn - V)[pos] / Vn[pos])) if pos.any() else 0.0
        V = Vn
        if res <= tol:
            conv = True
            break
    dp = DpResult(xs, V, g, it, res, conv, boundary, a)
    st = dp.stopping
    dp.touches_lower = bool(st[0])
    if dp.touches_lower and not allow_boundary_stop and np.any(g > 0):
        raise GridTooNarrow(f"stopping set reaches the lower grid edge {xs[0]:g}; widen the grid")
    return dp


def check_one_sided(dp: DpResult) -> dict:
    """Is the stopping set of the form grid ∩ [t, inf)?"""
    st = dp.stopping
    if not st.any():
        return {"is_up_set": False, "dp_threshold": None}
    first = int(np.argmax(st))
    up = bool(st[first:].all())
    return {"is_up_set": up, "dp_threshold": float(dp.grid[first]) if up else None}


def cross_validate(u: float, value: Callable, dp: DpResult, grid_step: float, se: Optional[Callable] = None,
                   tol: float = 1e-9) -> dict:
    """Compare a threshold and value accessor with the DP fixed point.

    ``value`` maps an array of grid points to solver values; ``se`` optionally
    gives their standard errors.  Passes when |dpThreshold - u| <= grid_step + tol
    and sup |V_solver - V_dp| <= max(1e-6, 4 SE).
    """
    cs = check_one_sided(dp)
    vs = np.asarray(value(dp.grid), dtype=float)
    err = np.zeros_like(vs) if se is None else np.asarray(se(dp.grid), dtype=float)
    diff = np.abs(vs - dp.values)
    allowed = np.maximum(1e-6, 4 * err)
    worst = int(np.argmax(diff - allowed))
    tgap = abs(cs["dp_threshold"] - u) if cs["dp_threshold"] is not None else math.inf
    if u == -math.inf and cs["dp_threshold"] is not None and cs["dp_threshold"] == dp.grid[0]:
        tgap = 0.0
    ok_t = cs["is_up_set"] and tgap <= grid_step + tol
    ok_v = bool(np.all(diff <= allowed))
    return {
        "pass": bool(ok_t and ok_v),
        "is_up_set": cs["is_up_set"],
        "dp_threshold": cs["dp_threshold"],
        "u": u,
        "threshold_gap": tgap,
        "value_gap": float(diff.max()) if diff.size else 0.0,
        "worst_x": float(dp.grid[worst]) if diff.size else None,
        "worst_solver": float(vs[worst]) if diff.size else None,
        "worst_dp": float(dp.values[worst]) if diff.size else None,
        "converged": dp.converged,
        "iterations": dp.iterations,
    }


def boundary_sensitivity(law: LatticeLaw, f: RewardFunction, q: float, grid: Sequence[float], **kw) -> dict:
    """Rerun on a grid twice as wide (same centre) and report the largest value change."""
    lo, hi = float(grid[0]), float(grid[-1])
    c, w = 0.5 * (lo + hi), hi - lo
    a = value_iteration(law, f, q, (lo, hi), **kw)
    lo2 = lo - w / 2
    lo2 = lo - law.unit * round((lo - lo2) / law.unit)
    b = value_iteration(law, f, q, (lo2, hi + w / 2), **kw)
    vb = np.interp(a.grid, b.grid, b.values)
    return {"max_change": float(np.max(np.abs(vb - a.values))), "centre": c}


def dp_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)
