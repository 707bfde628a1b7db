import math
import os
import subprocess
import sys

import numpy as np
import pytest

from onesided import _backend, levy
from onesided.stochastic import JumpDistribution, LatticeLaw, gaussian_law, simulate_walk

needs_compiled = pytest.mark.skipif("compiled" not in _backend.available(), reason="extension not built")

LATTICE = LatticeLaw(1.0, [[-2, 0.6], [-1, 0.1], [1, 0.2], [3, 0.1]])
JUMP_DIFFUSION = levy.LevyModel(-0.5, 0.5, 1.0, JumpDistribution.exponential(0.3))
N = 20_000

CASES = {
    "lattice": lambda be, n=N: simulate_walk(LATTICE, 0.05, -5.0, 0, False, n, 1, backend=be),
    "gaussian": lambda be, n=N: simulate_walk(gaussian_law(-0.3, 1.0), 0.0, -2.0, 0, False, n, 2, backend=be),
    "jump diffusion": lambda be, n=N: simulate_walk(levy.step_law(JUMP_DIFFUSION, 1 / 64), 0.05 / 64, -1.0, 0,
                                                    False, n, 3, backend=be),
    "bridge": lambda be, n=N: simulate_walk(levy.step_law(levy.LevyModel.brownian(), 1 / 64), 0.5 / 64, -1.0, 0,
                                            False, n, 4, bridge=True, backend=be),
    "continuous": lambda be, n=N: levy.simulate_continuous(levy.LevyModel.poisson_minus_drift(0.5), 0.0, -0.5,
                                                           False, n, 5, backend=be),
}


def _stat(s):
    w = np.zeros(s.n)
    w[s.passed] = np.exp(-s.time[s.passed]) * (1.0 + s.over[s.passed])
    return w.mean(), w.std(ddof=1) / math.sqrt(s.n)


@needs_compiled
@pytest.mark.parametrize("case", sorted(CASES))
def test_backends_agree_in_law(case):
    mp, sp = _stat(CASES[case]("python"))
    mc, sc = _stat(CASES[case]("compiled"))
    assert abs(mp - mc) <= 4 * math.hypot(sp, sc)


@pytest.mark.parametrize("case", sorted(CASES))
def test_each_backend_is_seed_deterministic(case):
    for be in _backend.available():
        a, b = CASES[case](be, 2000), CASES[case](be, 2000)
        np.testing.assert_array_equal(a.over, b.over)
        np.testing.assert_array_equal(a.time, b.time)


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        _backend.get("fortran")


def test_env_forces_python_fallback():
    env = {**os.environ, "ONESIDED_BACKEND": "python"}
    r = subprocess.run([sys.executable, "-c", "import onesided; print(onesided.BACKEND)"], capture_output=True,
                       text=True, env=env)
    assert r.stdout.strip() == "python"
