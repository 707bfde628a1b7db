"""Increasing, logconcave, right-continuous rewards represented through h = log g.

Every reward stores its log ``h`` and exposes one-sided log-derivatives, the
left edge of positivity ``x0`` and the asymptotic slope ``beta``.  ``g`` is only
exponentiated on demand so that exponentially growing rewards never overflow
inside the algorithms, which all work with differences of ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import InvalidReward, InvalidTruncation

NEG_INF = -math.inf
POS_INF = math.inf

def _as_array(x):
    return np.asarray(x, dtype=float)


def _ret(x, out):
    """Return a Python float for scalar input, an array otherwise."""
    if np.ndim(x) == 0:
        return float(out)
    return out


class RewardFunction:
    """Base class.  Subclasses implement ``_h``, ``_dleft`` and ``_dright`` on arrays.

    Attributes
    ----------
    kind : str
        Name used in the JSON form.
    x0 : float
        ``inf{s : g(s) > 0}``; ``-inf`` when g is everywhere positive.
    beta : float
        ``lim h'(x-)`` as x grows.
    strict_slope_gap : bool or None
        True when ``h'(x-) > beta`` at every x is known analytically, False when
        it is known to fail, None when only a numerical probe is possible.
    left_slope : float or None
        ``lim h'(x)`` as x decreases to -inf (only meaningful when x0 = -inf).
    linear_from : float
        h is affine on ``[linear_from, inf)``; ``inf`` when no such point is known.
    """

    kind = "abstract"
    x0: float = NEG_INF
    beta: float = 0.0
    strict_slope_gap: Optional[bool] = None
    left_slope: Optional[float] = None
    linear_from: float = POS_INF

    # -- array kernels -------------------------------------------------------
    def _h(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dleft(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _dright(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- public API ----------------------------------------------------------
    def h(self, x):
        """log g(x), with -inf where g vanishes."""
        xa = _as_array(x)
        return _ret(x, self._h(xa))

    def eval(self, x):
        """g(x); zero below x0."""
        xa = _as_array(x)
        with np.errstate(over="ignore"):
            return _ret(x, np.exp(self._h(xa)))

    __call__ = eval

    def log_deriv_left(self, x):
        """h'(x-), +inf where g(x) = 0 or at a jump of g."""
        xa = _as_array(x)
        return _ret(x, self._dleft(xa))

    def log_deriv_right(self, x):
        """h'(x+), +inf where g vanishes on a right neighbourhood."""
        xa = _as_array(x)
        return _ret(x, self._dright(xa))

    def deriv_left(self, x):
        """g'(x-) = g(x) h'(x-); zero where g vanishes to the left."""
        xa = _as_array(x)
        hx = self._h(xa)
        d = self._dleft(xa)
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.where(np.isfinite(hx) & np.isfinite(d), np.exp(hx) * d, np.where(np.isfinite(hx), np.inf, 0.0))
        return _ret(x, out)

    def deriv_right(self, x):
        """g'(x+) = g(x) h'(x+)."""
        xa = _as_array(x)
        hx = self._h(xa)
        d = self._dright(xa)
        with np.errstate(invalid="ignore", over="ignore"):
            out = np.where(np.isfinite(hx) & np.isfinite(d), np.exp(hx) * d, 0.0)
        return _ret(x, out)

    def asymptotic_slope(self) -> float:
        return float(self.beta)

    def kinks(self) -> np.ndarray:
        """Points where h'(x-) > h'(x+) other than x0 (empty for smooth kinds)."""
        return np.empty(0)

    def truncate_above(self, b: float) -> "RewardFunction":
        return Truncated(self, b)

    def scaled(self, c: float) -> "RewardFunction":
        """The reward c * g; same x0, beta and log-derivatives."""
        return Scaled(self, c)

    def to_piecewise(self, grid: Sequence[float]) -> "PiecewiseLogLinear":
        """Secant interpolation of h on ``grid``; concave whenever h is."""
        xs = np.sort(np.asarray(grid, dtype=float))
        if self.x0 > NEG_INF:
            xs = xs[xs >= self.x0]
        hs = self._h(xs)
        ok = np.isfinite(hs)
        xs, hs = xs[ok], hs[ok]
        if xs.size < 2:
            raise InvalidReward("grid needs at least two points where g > 0")
        sl = np.diff(hs) / np.diff(xs)
        sl = np.minimum.accumulate(np.maximum(sl, 0.0))
        slopes = np.concatenate([[sl[0]], sl, [self.beta if sl[-1] >= self.beta else sl[-1]]])
        x0 = self.x0 if self.x0 > NEG_INF else NEG_INF
        bps = xs
        if x0 > NEG_INF and np.isclose(xs[0], x0):
            bps = xs[1:]
            slopes = slopes[1:]
        return PiecewiseLogLinear(bps, slopes, anchor_x=float(xs[-1]), anchor_logvalue=float(hs[-1]), x0=x0)

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_dict()})"


# ---------------------------------------------------------------------------
# analytic kinds


@dataclass(frozen=True, repr=False)
class PowerPlus(RewardFunction):
    """g(x) = (x+)^nu."""

    nu: float
    kind = "PowerPlus"
    x0 = 0.0
    beta = 0.0
    strict_slope_gap = True

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidReward("PowerPlus needs nu > 0")

    def _h(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x > 0, self.nu * np.log(np.where(x > 0, x, 1.0)), NEG_INF)

    def _dleft(self, x):
        with np.errstate(divide="ignore"):
            return np.where(x > 0, self.nu / np.where(x > 0, x, 1.0), POS_INF)

    _dright = _dleft

    def to_dict(self):
        return {"kind": self.kind, "nu": self.nu}


@dataclass(frozen=True, repr=False)
class ExpCall(RewardFunction):
    """g(x) = (e^x - K)+."""

    K: float
    kind = "ExpCall"
    beta = 1.0
    strict_slope_gap = True

    def __post_init__(self):
        if not self.K > 0:
            raise InvalidReward("ExpCall needs K > 0")

    @property
    def x0(self):  # type: ignore[override]
        return math.log(self.K)

    def _h(self, x):
        lk = math.log(self.K)
        with np.errstate(divide="ignore", invalid="ignore"):
            # log(e^x - K) = x + log1p(-K e^-x)
            v = x + np.log1p(-np.exp(lk - np.where(x > lk, x, lk + 1.0)))
        return np.where(x > lk, v, NEG_INF)

    def _dleft(self, x):
        lk = math.log(self.K)
        with np.errstate(divide="ignore", over="ignore"):
            v = 1.0 / (-np.expm1(lk - np.where(x > lk, x, lk + 1.0)))
        return np.where(x > lk, v, POS_INF)

    _dright = _dleft

    def to_dict(self):
        return {"kind": self.kind, "K": self.K}


@dataclass(frozen=True, repr=False)
class ExpPut(RewardFunction):
    """g(x) = (K - e^-x)+, the put payoff in the coordinate x = -log S."""

    K: float
    kind = "ExpPut"
    beta = 0.0
    strict_slope_gap = True

    def __post_init__(self):
        if not self.K > 0:
            raise InvalidReward("ExpPut needs K > 0")

    @property
    def x0(self):  # type: ignore[override]
        return -math.log(self.K)

    def _h(self, x):
        x0 = -math.log(self.K)
        xs = np.where(x > x0, x, x0 + 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            v = math.log(self.K) + np.log1p(-np.exp(-xs) / self.K)
        return np.where(x > x0, v, NEG_INF)

    def _dleft(self, x):
        x0 = -math.log(self.K)
        xs = np.where(x > x0, x, x0 + 1.0)
        with np.errstate(over="ignore"):
            v = 1.0 / np.expm1(xs + math.log(self.K))
        return np.where(x > x0, v, POS_INF)

    _dright = _dleft

    def to_dict(self):
        return {"kind": self.kind, "K": self.K}


@dataclass(frozen=True, repr=False)
class Indicator(RewardFunction):
    """g = 1 on [a, inf), 0 below."""

    a: float
    kind = "Indicator"
    beta = 0.0
    strict_slope_gap = False

    @property
    def x0(self):  # type: ignore[override]
        return float(self.a)

    def _h(self, x):
        return np.where(x >= self.a, 0.0, NEG_INF)

    def _dleft(self, x):
        return np.where(x > self.a, 0.0, POS_INF)

    def _dright(self, x):
        return np.where(x >= self.a, 0.0, POS_INF)

    def to_dict(self):
        return {"kind": self.kind, "a": self.a}


@dataclass(frozen=True, repr=False)
class ExpLinear(RewardFunction):
    """g(x) = exp(c + slope * x)."""

    slope: float = 1.0
    c: float = 0.0
    kind = "ExpLinear"
    strict_slope_gap = False
    linear_from = NEG_INF

    def __post_init__(self):
        if not self.slope > 0:
            raise InvalidReward("ExpLinear needs slope > 0 (a constant reward is excluded)")

    @property
    def beta(self):  # type: ignore[override]
        return float(self.slope)

    @property
    def left_slope(self):  # type: ignore[override]
        return float(self.slope)

    def _h(self, x):
        return self.c + self.slope * x

    def _dleft(self, x):
        return np.full_like(x, self.slope, dtype=float)

    _dright = _dleft

    def to_dict(self):
        return {"kind": self.kind, "c": self.c, "slope": self.slope}


class PiecewiseLogLinear(RewardFunction):
    """Continuous piecewise-linear concave h on (x0, inf).

    ``slopes`` has one more entry than ``breakpoints``: slopes[0] applies left of
    breakpoints[0] (down to x0), slopes[-1] right of the last breakpoint.  The
    level is fixed by ``h(anchor_x) = anchor_logvalue``.
    """

    kind = "PiecewiseLogLinear"

    def __init__(self, breakpoints, slopes, anchor_x: float = 0.0, anchor_logvalue: float = 0.0, x0=NEG_INF):
        bp = np.asarray(breakpoints, dtype=float).ravel()
        sl = np.asarray(slopes, dtype=float).ravel()
        if isinstance(x0, str):
            if x0.strip().lower() not in ("-inf", "-infinity"):
                raise InvalidReward(f"x0 must be a number or '-inf', got {x0!r}")
            x0 = NEG_INF
        x0 = float(x0)
        if sl.size != bp.size + 1:
            raise InvalidReward("need len(slopes) == len(breakpoints) + 1")
        if bp.size and np.any(np.diff(bp) <= 0):
            raise InvalidReward("breakpoints must be strictly increasing")
        if np.any(sl < 0) or not np.all(np.isfinite(sl)):
            raise InvalidReward("slopes must be finite and nonnegative (g increasing)")
        if np.any(np.diff(sl) > 1e-14 * np.maximum(1.0, np.abs(sl[:-1]))):
            raise InvalidReward("slopes must be nonincreasing (log g concave)")
        if x0 > NEG_INF and bp.size and bp[0] <= x0:
            raise InvalidReward("breakpoints must lie to the right of x0")
        if x0 > NEG_INF and anchor_x < x0:
            raise InvalidReward("anchor must lie at or right of x0")
        if x0 == NEG_INF and not np.any(sl > 0):
            raise InvalidReward("reward is constant")
        self.breakpoints = bp
        self.slopes = sl
        self.anchor_x = float(anchor_x)
        self.anchor_logvalue = float(anchor_logvalue)
        self.x0 = x0
        self.beta = float(sl[-1])
        self.strict_slope_gap = False  # the last segment is log-linear
        self.left_slope = float(sl[0]) if x0 == NEG_INF else None
        self.linear_from = max(float(bp[-1]) if bp.size else NEG_INF, x0)

    def _integrate(self, x):
        """h(x) from the anchor by integrating slopes, x arbitrary array."""
        x = np.asarray(x, dtype=float)
        bp, sl = self.breakpoints, self.slopes

        def prim(t):
            # integral of slope from a fixed origin (bp[0] or 0) to t
            t = np.asarray(t, dtype=float)
            if bp.size == 0:
                return sl[0] * t
            out = np.where(t <= bp[0], sl[0] * (t - bp[0]), 0.0)
            acc = 0.0
            for i in range(bp.size):
                right = bp[i + 1] if i + 1 < bp.size else np.inf
                seg = sl[i + 1]
                inside = (t > bp[i]) & (t <= right)
                out = np.where(inside, acc + seg * (t - bp[i]), out)
                if np.isfinite(right):
                    acc += seg * (right - bp[i])
            return out

        return self.anchor_logvalue + prim(x) - prim(self.anchor_x)

    def _h(self, x):
        v = self._integrate(x)
        if self.x0 > NEG_INF:
            v = np.where(x >= self.x0, v, NEG_INF)
        return v

    def _seg_slope(self, x, left: bool):
        idx = np.searchsorted(self.breakpoints, x, side="left" if left else "right")
        return self.slopes[idx]

    def _dleft(self, x):
        d = self._seg_slope(x, True).astype(float)
        if self.x0 > NEG_INF:
            d = np.where(x > self.x0, d, POS_INF)
        return d

    def _dright(self, x):
        d = self._seg_slope(x, False).astype(float)
        if self.x0 > NEG_INF:
            d = np.where(x >= self.x0, d, POS_INF)
        return d

    def kinks(self):
        jump = self.slopes[:-1] > self.slopes[1:]
        return self.breakpoints[jump].copy()

    def to_dict(self):
        return {
            "kind": self.kind,
            "breakpoints": [float(b) for b in self.breakpoints],
            "slopes": [float(s) for s in self.slopes],
            "anchor_x": self.anchor_x,
            "anchor_logvalue": self.anchor_logvalue,
            "x0": "-inf" if self.x0 == NEG_INF else self.x0,
        }


class Custom(RewardFunction):
    """User-supplied h with optional derivative evaluators.

    The evaluator must accept numpy arrays.  Construction runs the three-point
    concavity and monotonicity test on a 256-point probe grid and rejects the
    function on failure.
    """

    kind = "Custom"
    _probe_points = 256

    def __init__(
        self,
        h: Callable[[np.ndarray], np.ndarray],
        dh_left: Optional[Callable] = None,
        dh_right: Optional[Callable] = None,
        *,
        x0: float = NEG_INF,
        beta: float,
        strict_slope_gap: Optional[bool] = None,
        left_slope: Optional[float] = None,
        probe: tuple[float, float] | None = None,
        name: str = "Custom",
        params: Optional[dict] = None,
        kinks: Sequence[float] = (),
    ):
        self._hfun = h
        self._dl = dh_left
        self._dr = dh_right
        self.x0 = float(x0)
        self.beta = float(beta)
        self.strict_slope_gap = strict_slope_gap
        self.left_slope = left_slope
        self.name = name
        self.params = dict(params or {})
        self._kinks = np.asarray(kinks, dtype=float)
        lo, hi = probe if probe is not None else ((self.x0 if self.x0 > NEG_INF else -20.0), (self.x0 if self.x0 > NEG_INF else 0.0) + 20.0)
        self._validate(lo, hi)

    def _validate(self, lo, hi):
        xs = np.linspace(lo, hi, self._probe_points)
        if self.x0 > NEG_INF:
            xs = xs[xs > self.x0]
        hs = np.asarray(self._hfun(xs), dtype=float)
        if np.any(np.isnan(hs)):
            raise InvalidReward("h returned NaN on the probe grid")
        fin = np.isfinite(hs)
        if np.any(np.diff(fin.astype(int)) < 0):
            raise InvalidReward("g vanishes to the right of a positive point (not increasing)")
        xs, hs = xs[fin], hs[fin]
        if xs.size < 3:
            raise InvalidReward("g positive on too few probe points")
        sl = np.diff(hs) / np.diff(xs)
        scale = np.maximum(1.0, np.abs(sl))
        if np.any(sl < -1e-12 * scale):
            raise InvalidReward("h decreases on the probe grid (g not increasing)")
        if np.any(np.diff(sl) > 1e-9 * scale[:-1]):
            raise InvalidReward("h fails the three-point concavity test (g not logconcave)")
        if np.all(np.abs(sl) < 1e-15) and self.x0 == NEG_INF:
            raise InvalidReward("reward is constant on the probe grid")

    def _h(self, x):
        v = np.asarray(self._hfun(x), dtype=float)
        if self.x0 > NEG_INF:
            v = np.where(x >= self.x0, v, NEG_INF)
        return v

    def _num_deriv(self, x, side):
        eps = 1e-6 * np.maximum(1.0, np.abs(x))
        if side < 0:
            d = (self._h(x) - self._h(x - eps)) / eps
        else:
            d = (self._h(x + eps) - self._h(x)) / eps
        return np.where(np.isfinite(d), d, POS_INF)

    def _dleft(self, x):
        d = np.asarray(self._dl(x), dtype=float) if self._dl else self._num_deriv(x, -1)
        if self.x0 > NEG_INF:
            d = np.where(x > self.x0, d, POS_INF)
        return d

    def _dright(self, x):
        d = np.asarray(self._dr(x), dtype=float) if self._dr else self._num_deriv(x, +1)
        if self.x0 > NEG_INF:
            d = np.where(x >= self.x0, d, POS_INF)
        return d

    def kinks(self):
        return self._kinks.copy()

    def to_dict(self):
        if self.name == "Custom":
            raise InvalidReward("Custom rewards built from Python callables have no JSON form")
        return {"kind": self.name, **self.params}


def TaperedExponential(rate: float, curvature: float = 0.0) -> Custom:
    """Exponential reward exp(rate*x) tapered on both sides.

    h(x) = rate*x - x**2                for x <= 0
           rate*x - curvature*x**2      for 0 < x <= 1
           A - B/x                      for x > 1, with A, B matching value and slope at 1.

    With ``curvature = 0`` h is exactly linear on [0, 1].  beta = 0 and the
    slope gap h' > 0 holds everywhere.
    """
    lam, c = float(rate), float(curvature)
    if not lam > 2 * c or c < 0:
        raise InvalidReward("TaperedExponential needs rate > 2*curvature >= 0")
    B = lam - 2 * c
    A = lam - c + B

    def h(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 1, x, 1.0)
        return np.where(x <= 0, lam * x - x * x, np.where(x <= 1, lam * x - c * x * x, A - B / xs))

    def dh(x):
        x = np.asarray(x, dtype=float)
        xs = np.where(x > 1, x, 1.0)
        return np.where(x <= 0, lam - 2 * x, np.where(x <= 1, lam - 2 * c * x, B / (xs * xs)))

    return Custom(
        h, dh, dh, beta=0.0, strict_slope_gap=True, left_slope=POS_INF,
        probe=(-5.0, 10.0), name="TaperedExponential", params={"rate": lam, "curvature": c},
    )


def LogisticExponential(slope: float) -> Custom:
    """g(x) = exp(slope*x) / (1 + exp(-x)): log-slope decreases strictly to ``slope``."""
    s = float(slope)
    if s < 0:
        raise InvalidReward("LogisticExponential needs slope >= 0")

    def h(x):
        x = np.asarray(x, dtype=float)
        return s * x - np.logaddexp(0.0, -x)

    def dh(x):
        x = np.asarray(x, dtype=float)
        return s + 0.5 * (1.0 - np.tanh(0.5 * x))  # s + 1/(1+e^x)

    return Custom(
        h, dh, dh, beta=s, strict_slope_gap=True, left_slope=s + 1.0,
        probe=(-30.0, 30.0), name="LogisticExponential", params={"slope": s},
    )


class Truncated(RewardFunction):
    """x -> g(min(x, b))."""

    kind = "Truncated"

    def __init__(self, base: RewardFunction, b: float):
        b = float(b)
        if not b > base.x0:
            raise InvalidTruncation(f"cap b={b} must exceed x0={base.x0}; the result would be constant zero")
        self.base = base
        self.b = b
        self.x0 = base.x0
        self.beta = 0.0
        self.strict_slope_gap = False
        self.left_slope = base.left_slope
        self.linear_from = b

    def _h(self, x):
        return self.base._h(np.minimum(x, self.b))

    def _dleft(self, x):
        return np.where(x <= self.b, self.base._dleft(np.minimum(x, self.b)), 0.0)

    def _dright(self, x):
        return np.where(x < self.b, self.base._dright(np.minimum(x, self.b)), 0.0)

    def kinks(self):
        k = [v for v in self.base.kinks() if v < self.b]
        if float(self.base._dleft(np.array([self.b]))[0]) > 0:
            k.append(self.b)
        return np.asarray(k, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "b": self.b}


class Scaled(RewardFunction):
    """x -> c * g(x) for c > 0."""

    kind = "Scaled"

    def __init__(self, base: RewardFunction, c: float):
        c = float(c)
        if not (c > 0 and math.isfinite(c)):
            raise InvalidReward("scale factor must be positive and finite")
        self.base = base
        self.c = c
        self.x0 = base.x0
        self.beta = base.beta
        self.strict_slope_gap = base.strict_slope_gap
        self.left_slope = base.left_slope
        self.linear_from = base.linear_from

    def _h(self, x):
        return self.base._h(x) + math.log(self.c)

    def _dleft(self, x):
        return self.base._dleft(x)

    def _dright(self, x):
        return self.base._dright(x)

    def kinks(self):
        return self.base.kinks()

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "c": self.c}


def truncate_above(f: RewardFunction, b: float) -> RewardFunction:
    """Reward x -> g(min(x, b)); agrees with f on (-inf, b]."""
    return Truncated(f, b)


# ---------------------------------------------------------------------------
# JSON


def reward_from_dict(d: dict) -> RewardFunction:
    d = dict(d)
    for flag, what in (("increasing", "increasing"), ("logconcave", "logconcave")):
        if d.pop(flag, True) is False:
            raise InvalidReward(f"reward declared not {what}; g must be nonnegative, increasing and logconcave "
                                "(h = log g concave with h'(x-) nonincreasing)")
    kind = d.pop("kind", None)
    if kind is None and "breakpoints" in d:
        kind = "PiecewiseLogLinear"
    key = str(kind).lower().replace("_", "")
    try:
        if key == "powerplus":
            return PowerPlus(float(d["nu"]))
        if key == "expcall":
            return ExpCall(float(d["K"]))
        if key == "expput":
            return ExpPut(float(d["K"]))
        if key == "indicator":
            return Indicator(float(d.get("a", 0.0)))
        if key == "explinear":
            return ExpLinear(float(d["slope"]), float(d.get("c", 0.0)))
        if key in ("piecewiseloglinear", "piecewise"):
            return PiecewiseLogLinear(
                d.get("breakpoints", []), d["slopes"], d.get("anchor_x", 0.0), d.get("anchor_logvalue", 0.0),
                d.get("x0", "-inf"),
            )
        if key == "taperedexponential":
            return TaperedExponential(float(d["rate"]), float(d.get("curvature", 0.0)))
        if key == "logisticexponential":
            return LogisticExponential(float(d["slope"]))
        if key == "scaled":
            return Scaled(reward_from_dict(d["base"]), float(d["c"]))
        if key == "truncated":
            return Truncated(reward_from_dict(d["base"]), float(d["b"]))
    except KeyError as exc:
        raise InvalidReward(f"reward kind {kind!r} is missing parameter {exc}") from None
    raise InvalidReward(f"unknown reward kind {kind!r}")


def sup_weighted(f: RewardFunction, level: float, rate: float) -> float:
    """log of sup_{z >= level} g(z) exp(-rate (z - level)).

    Finite when the slope of h eventually drops to ``rate`` or below.  Returns
    +inf when beta > rate.
    """
    if f.beta > rate + 1e-12:
        return POS_INF
    z = max(level, f.x0) if f.x0 > NEG_INF else level
    if f.x0 > NEG_INF and level < f.x0:
        z = f.x0
    if float(f._dright(np.array([z]))[0]) <= rate:
        return float(f._h(np.array([z]))[0]) - rate * (z - level)
    # h(z) - rate z is concave; find where h'(.) crosses rate
    lo, hi, step = z, z + 1.0, 1.0
    while float(f._dright(np.array([hi]))[0]) > rate:
        lo, step = hi, step * 2.0
        hi = z + step
        if step > 1e12:  # slope stays above rate (beta == rate)
            return float(f._h(np.array([hi]))[0]) - rate * (hi - level)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(f._dright(np.array([mid]))[0]) > rate:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-12 * max(1.0, abs(hi)):
            break
    return float(f._h(np.array([hi]))[0]) - rate * (hi - level)
