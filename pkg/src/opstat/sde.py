"""Multiplicative-noise SDE ``dX = -a(t) X dt + sqrt(omega) X dB``.

Euler-Maruyama paths, the closed-form geometric Brownian motion on the same
Brownian increments, strong/weak convergence studies, and the operator
square root and diffusion semigroup.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from typing import Callable, Sequence, Union

import numpy as np
from scipy.integrate import quad

from . import kernels
from .errors import NumericalError, ValidationError
from .operators import HermitianOperator, eig_hermitian, matrix_function
from .rng import check_seed, make_rng
from .tolerances import PSD_CLAMP_TOL

Drift = Union[float, Callable[[float], float]]


@dataclass(frozen=True)
class SDEConfig:
    """Parameters of one simulation.

    ``drift_coeff`` stands in for the gradient term and may be a constant or
    a callable of time; ``omega`` is the diffusion coefficient (noise
    amplitude ``sqrt(omega)``).
    """

    x0: float
    drift_coeff: Drift = 0.0
    omega: float = 0.0
    t_end: float = 1.0
    n_steps: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.x0 == 0 or not math.isfinite(self.x0):
            raise ValidationError("x0 must be finite and non-zero")
        if not self.omega >= 0:
            raise ValidationError(f"omega must be non-negative, got {self.omega}")
        if not self.t_end > 0:
            raise ValidationError(f"t_end must be positive, got {self.t_end}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValidationError(f"n_steps must be a positive integer, got {self.n_steps}")
        object.__setattr__(self, "seed", check_seed(self.seed))

    @property
    def dt(self) -> float:
        return self.t_end / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.dt

    def drift_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if callable(self.drift_coeff):
            return np.array([float(self.drift_coeff(s)) for s in t.ravel()]).reshape(t.shape)
        return np.full(t.shape, float(self.drift_coeff))

    def drift_integral(self, t) -> np.ndarray:
        """``int_0^t a(s) ds`` at each time in ``t``."""
        t = np.asarray(t, dtype=float)
        if not callable(self.drift_coeff):
            return float(self.drift_coeff) * t
        f = self.drift_coeff
        return np.array([quad(f, 0.0, s)[0] for s in t.ravel()]).reshape(t.shape)


@dataclass(frozen=True, eq=False)
class SamplePath:
    times: np.ndarray
    values: np.ndarray
    brownian_increments: np.ndarray

    def __post_init__(self):
        n = len(self.brownian_increments)
        if len(self.times) != n + 1 or len(self.values) != n + 1:
            raise ValidationError("path arrays have inconsistent lengths")
        steps = np.diff(self.times)
        if n and np.max(np.abs(steps - steps[0])) > 1e-12:
            raise ValidationError("time grid is not uniform")
        for name in ("times", "values", "brownian_increments"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "x"])
        for t, x in zip(self.times, self.values):
            w.writerow([repr(float(t)), repr(float(x))])
        return buf.getvalue()


def brownian_increments(cfg: SDEConfig, n_paths: int | None = None, stream=()) -> np.ndarray:
    """Normal(0, dt) increments; shape ``(n_steps,)`` or ``(n_paths, n_steps)``."""
    rng = make_rng(cfg.seed, *stream)
    shape = (cfg.n_steps,) if n_paths is None else (n_paths, cfg.n_steps)
    return rng.standard_normal(shape) * math.sqrt(cfg.dt)


def euler_maruyama_batch(cfg: SDEConfig, increments) -> np.ndarray:
    """Euler-Maruyama values, shape ``(n_paths, n_steps + 1)``, on given increments."""
    dB = np.atleast_2d(np.asarray(increments, dtype=float))
    if dB.shape[1] != cfg.n_steps:
        raise ValidationError(f"expected {cfg.n_steps} increments per path, got {dB.shape[1]}")
    drift = cfg.drift_at(cfg.times()[:-1])
    x0 = np.full(dB.shape[0], float(cfg.x0))
    return kernels.euler_maruyama(x0, drift, math.sqrt(cfg.omega), cfg.dt, dB)


def euler_maruyama(cfg: SDEConfig) -> SamplePath:
    """One Euler-Maruyama path driven by the seeded generator.

    ``X_{k+1} = X_k (1 - a(t_k) dt + sqrt(omega) dB_k)``.
    """
    dB = brownian_increments(cfg)
    values = euler_maruyama_batch(cfg, dB[None])[0]
    return SamplePath(cfg.times(), values, dB)


def gbm_exact_batch(cfg: SDEConfig, increments) -> np.ndarray:
    dB = np.atleast_2d(np.asarray(increments, dtype=float))
    if dB.shape[1] != cfg.n_steps:
        raise ValidationError(f"expected {cfg.n_steps} increments per path, got {dB.shape[1]}")
    t = cfg.times()
    b = np.concatenate([np.zeros((dB.shape[0], 1)), np.cumsum(dB, axis=1)], axis=1)
    expo = -cfg.drift_integral(t) - 0.5 * cfg.omega * t
    return cfg.x0 * np.exp(expo[None, :] + math.sqrt(cfg.omega) * b)


def gbm_exact(cfg: SDEConfig, increments) -> SamplePath:
    """Ito solution ``x0 exp(-int a - omega t / 2 + sqrt(omega) B(t))`` on given increments."""
    if isinstance(increments, SamplePath):
        increments = increments.brownian_increments
    dB = np.asarray(increments, dtype=float)
    if dB.shape != (cfg.n_steps,):
        raise ValidationError(f"expected {cfg.n_steps} increments, got shape {dB.shape}")
    return SamplePath(cfg.times(), gbm_exact_batch(cfg, dB[None])[0], dB)


def sum_coarse(dB, factor: int) -> np.ndarray:
    """Aggregate fine increments into blocks of ``factor`` steps."""
    dB = np.atleast_2d(dB)
    return dB.reshape(dB.shape[0], -1, factor).sum(axis=2)


def fsum_mean(x) -> float:
    x = np.ravel(x)
    return math.fsum(x) / len(x)


@dataclass
class ConvergenceTable:
    dt: list
    strong_error: list
    weak_error: list
    strong_order: float
    weak_order: float
    n_paths: int

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["dt", "strong_err", "weak_err"])
        for row in zip(self.dt, self.strong_error, self.weak_error):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def _slope(dt, err):
    dt, err = np.asarray(dt), np.asarray(err)
    ok = err > 0
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(dt[ok]), np.log(err[ok]), 1)[0])


def convergence_study(
    base_cfg: SDEConfig, step_counts: Sequence[int], n_paths: int = 1000
) -> ConvergenceTable:
    """Strong and weak errors of Euler-Maruyama against the exact solution.

    All resolutions share one set of increments on the finest grid, so the
    integrator and the oracle see the same Brownian paths.
    """
    steps = [int(s) for s in step_counts]
    if any(b <= a for a, b in zip(steps, steps[1:])):
        raise ValidationError("step counts must be increasing")
    finest = steps[-1]
    if any(finest % s for s in steps):
        raise ValidationError("every step count must divide the finest one")
    fine_cfg = replace(base_cfg, n_steps=finest)
    dB = brownian_increments(fine_cfg, n_paths)
    exact = gbm_exact_batch(fine_cfg, dB)[:, -1]
    dts, strong, weak = [], [], []
    for s in steps:
        cfg = replace(base_cfg, n_steps=s)
        em = euler_maruyama_batch(cfg, sum_coarse(dB, finest // s))[:, -1]
        diff = em - exact
        dts.append(cfg.dt)
        strong.append(fsum_mean(np.abs(diff)))
        weak.append(abs(fsum_mean(diff)))
    return ConvergenceTable(dts, strong, weak, _slope(dts, strong), _slope(dts, weak), n_paths)


# -- operators ---------------------------------------------------------------


def _psd_decomposition(h: HermitianOperator):
    decomp = eig_hermitian(h)
    lo = float(decomp.eigenvalues[0])
    if lo < -PSD_CLAMP_TOL:
        raise NumericalError(f"operator is not positive semidefinite (eigenvalue {lo:.3e})", lo)
    return decomp


def sqrt_operator(h: HermitianOperator) -> HermitianOperator:
    """Positive square root; eigenvalues in [-1e-10, 0) are clamped to zero."""
    decomp = _psd_decomposition(h)
    root = matrix_function(decomp, lambda x: math.sqrt(max(float(x), 0.0)))
    return HermitianOperator(0.5 * (root + root.conj().T))


def diffusion_semigroup(h: HermitianOperator, omega: float, t: float) -> np.ndarray:
    """``exp(-sqrt(omega) t H^{1/2})`` for positive semidefinite ``h``."""
    if omega < 0 or t < 0:
        raise ValidationError("omega and t must be non-negative")
    decomp = _psd_decomposition(h)
    rate = math.sqrt(omega) * t
    return matrix_function(decomp, lambda x: math.exp(-rate * math.sqrt(max(float(x), 0.0))))


def random_psd(dim: int, rng, rank: int | None = None) -> HermitianOperator:
    rank = dim if rank is None else rank
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    h = g @ g.conj().T / rank
    return HermitianOperator(0.5 * (h + h.conj().T))
