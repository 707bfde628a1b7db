"""Compare the compiled first-passage kernels with the numpy fallback.

Times the same simulations under both backends and checks that the
passage statistics agree within four combined standard errors.

    python benchmarks/bench_kernels.py [--paths 20000] [--repeat 3]
"""

from __future__ import annotations

import argparse
import math
import time

import numpy as np

from onesided import _backend, levy
from onesided.stochastic import JumpDistribution, LatticeLaw, gaussian_law, simulate_walk

CASES = {
    "lattice walk": lambda be, n: simulate_walk(
        LatticeLaw(1.0, [[-2, 0.6], [-1, 0.1], [1, 0.2], [3, 0.1]]), 0.05, -5.0, 0, False, n, 1, backend=be),
    "gaussian walk": lambda be, n: simulate_walk(gaussian_law(-0.3, 1.0), 0.0, -2.0, 0, False, n, 2, backend=be),
    "jump diffusion, dt=1/64": lambda be, n: simulate_walk(
        levy.step_law(levy.LevyModel(-0.5, 0.5, 1.0, JumpDistribution.exponential(0.3)), 1 / 64), 0.05 / 64, -1.0,
        0, False, n, 3, backend=be),
    "brownian bridge, dt=1/256": lambda be, n: simulate_walk(
        levy.step_law(levy.LevyModel.brownian(), 1 / 256), 0.5 / 256, -1.0, 0, False, n, 4, bridge=True,
        backend=be),
    "poisson with drift (exact)": lambda be, n: levy.simulate_continuous(
        levy.LevyModel.poisson_minus_drift(0.5), 0.0, -0.5, False, n, 5, backend=be),
}


def summary(sample) -> tuple[float, float]:
    """Mean and SE of (1 + overshoot) on passed paths, zero otherwise."""
    ok = sample.passed
    w = np.zeros(sample.n)
    w[ok] = 1.0 + sample.over[ok]
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(sample.n))


def bench(paths: int, repeat: int) -> list:
    rows = []
    for name, fn in CASES.items():
        out = {}
        for be in _backend.available():
            fn(be, min(paths, 512))  # warm-up
            best = math.inf
            for _ in range(repeat):
                t0 = time.perf_counter()
                s = fn(be, paths)
                best = min(best, time.perf_counter() - t0)
            out[be] = (best, *summary(s))
        rows.append((name, out))
    return rows


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"backends available: {', '.join(_backend.available())}; paths per run: {args.paths}")
    print(f"{'case':30s} {'python s':>10s} {'compiled s':>11s} {'speedup':>8s} {'agree':>6s}")
    for name, out in bench(args.paths, args.repeat):
        tp, mp, sp = out["python"]
        if "compiled" in out:
            tc, mc, sc = out["compiled"]
            agree = abs(mp - mc) <= 4 * math.hypot(sp, sc) + 1e-12
            print(f"{name:30s} {tp:10.3f} {tc:11.3f} {tp / tc:7.1f}x {'yes' if agree else 'NO':>6s}")
        else:
            print(f"{name:30s} {tp:10.3f} {'-':>11s} {'-':>8s} {'-':>6s}")


if __name__ == "__main__":
    main()
