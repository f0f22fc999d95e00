import csv
import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import gbm_mean, gbm_second_moment
from opstat import _fallback
from opstat.errors import NumericalError, ValidationError
from opstat.operators import HermitianOperator, max_abs
from opstat.rng import make_rng
from opstat.sde import (
    SDEConfig,
    brownian_increments,
    convergence_study,
    diffusion_semigroup,
    euler_maruyama,
    euler_maruyama_batch,
    gbm_exact,
    gbm_exact_batch,
    random_psd,
    sqrt_operator,
)

BASE = SDEConfig(x0=1.0, drift_coeff=1.0, omega=0.2, t_end=1.0, n_steps=32, seed=0)


def test_config_validation():
    for bad in [dict(x0=0.0), dict(x0=1.0, omega=-1), dict(x0=1.0, t_end=0), dict(x0=1.0, n_steps=0),
                dict(x0=1.0, n_steps=2.5), dict(x0=1.0, seed=-3)]:
        with pytest.raises(ValidationError):
            SDEConfig(**bad)


def test_constant_path(backend):
    p = euler_maruyama(SDEConfig(x0=2.5, n_steps=50))
    assert np.all(p.values == 2.5)


def test_deterministic_euler(backend):
    cfg = SDEConfig(x0=1.0, drift_coeff=1.5, t_end=2.0, n_steps=400)
    x = euler_maruyama(cfg).values
    assert x[-1] == pytest.approx((1 - 1.5 * cfg.dt) ** 400, rel=1e-12)
    assert abs(x[-1] - math.exp(-3.0)) < 0.01


def test_em_determinism(backend):
    a, b = euler_maruyama(BASE), euler_maruyama(BASE)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.brownian_increments, b.brownian_increments)


def test_backends_bit_identical():
    from opstat import kernels

    backends = kernels.available_backends()
    if "cython" not in backends:
        pytest.skip("compiled extension not built")
    cfg = SDEConfig(x0=1.3, drift_coeff=lambda t: 1 + t, omega=0.4, n_steps=256, seed=3)
    dB = brownian_increments(cfg, 500)
    drift = cfg.drift_at(cfg.times()[:-1])
    args = (np.full(500, 1.3), drift, math.sqrt(0.4), cfg.dt, dB)
    assert np.array_equal(backends["cython"].euler_maruyama(*args), _fallback.euler_maruyama(*args))


def test_gbm_examples():
    cfg = SDEConfig(x0=2.0, drift_coeff=0.7, omega=0.0, t_end=1.5, n_steps=30)
    ex = gbm_exact(cfg, np.zeros(30))
    assert np.allclose(ex.values, 2.0 * np.exp(-0.7 * cfg.times()), rtol=1e-14)
    cfg = SDEConfig(x0=1.0, drift_coeff=0.0, omega=0.3, t_end=2.0, n_steps=4)
    ex = gbm_exact(cfg, np.array([0.5, -0.2, 0.1, -0.4]))
    assert ex.values[-1] == pytest.approx(math.exp(-0.3), rel=1e-14)


def test_gbm_length_check():
    with pytest.raises(ValidationError):
        gbm_exact(BASE, np.zeros(5))
    with pytest.raises(ValidationError):
        euler_maruyama_batch(BASE, np.zeros((2, 5)))


def test_gbm_moments():
    n = 100_000
    cfg = SDEConfig(x0=1.0, drift_coeff=1.0, omega=0.2, t_end=1.0, n_steps=1, seed=42)
    xt = gbm_exact_batch(cfg, brownian_increments(cfg, n))[:, -1]
    se = xt.std(ddof=1) / math.sqrt(n)
    assert abs(xt.mean() - gbm_mean(1.0, 1.0, 1.0)) <= 3 * se
    x2 = xt**2
    se2 = x2.std(ddof=1) / math.sqrt(n)
    assert abs(x2.mean() - gbm_second_moment(1.0, 1.0, 0.2, 1.0)) <= 3 * se2


def test_time_dependent_drift():
    cfg = SDEConfig(x0=1.0, drift_coeff=lambda t: 2 * t, omega=0.0, t_end=1.0, n_steps=10)
    ex = gbm_exact(cfg, np.zeros(10))
    assert np.allclose(ex.values, np.exp(-cfg.times() ** 2), rtol=1e-12)


def test_convergence_orders(backend):
    table = convergence_study(BASE, [32, 64, 128, 256, 512], 1000)
    assert 0.35 <= table.strong_order <= 0.65
    assert 0.7 <= table.weak_order <= 1.3
    # monotone within 20 % sampling noise
    for a, b in zip(table.strong_error, table.strong_error[1:]):
        assert b <= 1.2 * a


def test_convergence_without_noise():
    cfg = SDEConfig(x0=1.0, drift_coeff=1.0, omega=0.0, t_end=1.0, n_steps=8)
    table = convergence_study(cfg, [8, 16, 32, 64], 10)
    assert table.strong_order == pytest.approx(1.0, abs=0.05)
    assert table.strong_error == table.weak_error


def test_convergence_validation():
    with pytest.raises(ValidationError):
        convergence_study(BASE, [64, 32])
    with pytest.raises(ValidationError):
        convergence_study(BASE, [24, 64])


def test_csv_columns():
    rows = list(csv.reader(io.StringIO(euler_maruyama(BASE).to_csv())))
    assert rows[0] == ["t", "x"] and len(rows) == 34
    table = convergence_study(BASE, [32, 64], 50)
    rows = list(csv.reader(io.StringIO(table.to_csv())))
    assert rows[0] == ["dt", "strong_err", "weak_err"] and float(rows[1][0]) == 1 / 32


# -- operators ------------------------------------------------------------------------------


def test_sqrt_examples():
    assert max_abs(sqrt_operator(HermitianOperator(np.eye(3))).matrix - np.eye(3)) < 1e-15
    assert max_abs(sqrt_operator(HermitianOperator(np.diag([4.0, 9.0]))).matrix - np.diag([2, 3])) < 1e-15


def test_sqrt_clamps_and_rejects():
    root = sqrt_operator(HermitianOperator(np.diag([-5e-11, 1.0])))
    assert max_abs(root.matrix - np.diag([0, 1])) < 1e-15
    with pytest.raises(NumericalError, match="not positive semidefinite"):
        sqrt_operator(HermitianOperator(np.diag([-1e-6, 1.0])))
    with pytest.raises(NumericalError):
        diffusion_semigroup(HermitianOperator(np.diag([-1.0, 1.0])), 1.0, 1.0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 8))
def test_sqrt_squares_back(seed, dim, rank):
    h = random_psd(dim, make_rng(seed), rank=min(rank, dim))
    r = sqrt_operator(h).matrix
    assert max_abs(r @ r - h.matrix) <= 1e-9
    rng = make_rng(seed, 1)
    f = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    assert abs(np.vdot(r @ f, r @ f) - np.vdot(f, h.matrix @ f)) <= 1e-9 * max(1, np.vdot(f, f).real)


def test_diffusion_examples():
    h = random_psd(4, make_rng(1))
    assert max_abs(diffusion_semigroup(h, 0.5, 0.0) - np.eye(4)) < 1e-14
    got = diffusion_semigroup(HermitianOperator(np.diag([1.0, 4.0])), 1.0, 1.0)
    assert max_abs(got - np.diag([math.exp(-1), math.exp(-2)])) < 1e-15


@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.floats(0.0, 3.0))
def test_diffusion_semigroup_properties(seed, dim, omega):
    h = random_psd(dim, make_rng(seed))
    p = lambda t: diffusion_semigroup(h, omega, t)  # noqa: E731
    assert max_abs(p(0.3) @ p(0.7) - p(1.0)) <= 1e-9
    assert np.linalg.norm(p(0.5), 2) <= 1 + 1e-10
    gaps = [max_abs(p(t) - np.eye(dim)) for t in (1e-1, 1e-3, 1e-5, 1e-7)]
    assert all(b <= a for a, b in zip(gaps, gaps[1:])) and gaps[-1] < 1e-5
