import os
import subprocess
import sys

import numpy as np
import pytest

from opstat import _fallback, kernels


def backend_in_subprocess(value):
    env = dict(os.environ)
    env.pop("OPSTAT_BACKEND", None)
    if value is not None:
        env["OPSTAT_BACKEND"] = value
    out = subprocess.run([sys.executable, "-c", "from opstat import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    return out.stdout.strip()


def test_env_forces_fallback():
    assert backend_in_subprocess("python") == "python"


def test_default_prefers_compiled():
    expected = "cython" if "cython" in kernels.available_backends() else "python"
    assert backend_in_subprocess(None) == expected


def test_rasterize_conventions(backend):
    # pixel centres at (c + 0.5) / N: a square covering [0.25, 0.75)^2 on an 8 grid
    sq = np.array([[0.25, 0.25], [0.75, 0.25], [0.75, 0.75], [0.25, 0.75]])
    mask = kernels.rasterize(sq, np.array([0, 4]), 8)
    expected = np.zeros((8, 8), dtype=bool)
    expected[2:6, 2:6] = True
    assert np.array_equal(mask, expected)


def test_rasterize_empty(backend):
    assert not kernels.rasterize(np.zeros((0, 2)), np.zeros(1, dtype=np.int64), 16).any()


def test_em_kernel_matches_formula(backend):
    dB = np.array([[0.1, -0.2, 0.05]])
    x = kernels.euler_maruyama(np.array([2.0]), np.array([1.0, 0.5, 0.0]), 0.3, 0.1, dB)
    ref = [2.0]
    for a, b in zip([1.0, 0.5, 0.0], dB[0]):
        ref.append(ref[-1] * ((1 - a * 0.1) + 0.3 * b))
    assert np.array_equal(x[0], ref)


@pytest.mark.skipif("cython" not in kernels.available_backends(), reason="extension not built")
def test_fallback_and_compiled_agree_on_em():
    rng = np.random.default_rng(0)
    args = (rng.random(50) + 0.5, rng.random(40), 0.7, 0.01, rng.standard_normal((50, 40)) * 0.1)
    assert np.array_equal(kernels.available_backends()["cython"].euler_maruyama(*args),
                          _fallback.euler_maruyama(*args))
