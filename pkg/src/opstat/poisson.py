"""Poisson processes: scalar jump paths, the operator Poisson semigroup,
spectral measures of vectors, and projection-valued jump paths.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import ValidationError
from .operators import (
    BorelArc,
    ProjectionOperator,
    SpectralDecomposition,
    UnitaryOperator,
    _projector_from_columns,
    eig_unitary,
    matrix_function,
    resolution_of_identity,
)
from .parallel import pmap
from .rng import check_seed, make_rng
from .tolerances import ADDITIVITY_DEFECT_TOL, RECONSTRUCTION_TOL

# sub-stream ids under a PoissonConfig seed
_JUMPS, _MARKS, _TRIALS = 0, 1, 2


@dataclass(frozen=True)
class PoissonConfig:
    rate: float
    horizon: float
    seed: int = 0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValidationError(f"rate must be positive, got {self.rate}")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ValidationError(f"horizon must be positive, got {self.horizon}")
        object.__setattr__(self, "seed", check_seed(self.seed))


@dataclass(frozen=True, eq=False)
class JumpPath:
    jump_times: np.ndarray
    horizon: float

    def __post_init__(self):
        t = np.array(self.jump_times, dtype=float)
        if t.size and (t[0] <= 0 or t[-1] > self.horizon or np.any(np.diff(t) <= 0)):
            raise ValidationError("jump times must be strictly increasing within (0, horizon]")
        t.setflags(write=False)
        object.__setattr__(self, "jump_times", t)

    @property
    def count(self) -> int:
        return int(self.jump_times.size)


def sample_poisson_path(cfg: PoissonConfig, stream: Sequence[int] = ()) -> JumpPath:
    """Jump times of a homogeneous Poisson process from exponential gaps.

    ``stream`` selects a sub-stream of ``cfg.seed``; the default stream is the
    one used by all single-path calls.
    """
    rng = make_rng(cfg.seed, _JUMPS, *stream)
    mean = cfg.rate * cfg.horizon
    chunk = int(mean + 5.0 * math.sqrt(mean) + 16)
    times = []
    t = 0.0
    while True:
        arrivals = t + np.cumsum(rng.standard_exponential(chunk) / cfg.rate)
        inside = arrivals[arrivals <= cfg.horizon]
        times.append(inside)
        if inside.size < chunk:
            break
        t = arrivals[-1]
    return JumpPath(np.concatenate(times), cfg.horizon)


def poisson_semigroup(
    u: UnitaryOperator, rate: float, t: float, decomp: SpectralDecomposition | None = None
) -> np.ndarray:
    """``exp(rate*t*(U - I))`` evaluated through the eigenbasis of ``u``.

    This is the Poisson average ``sum_n e^{-rt} (rt)^n / n! U^n``.
    """
    if rate <= 0:
        raise ValidationError(f"rate must be positive, got {rate}")
    if t < 0:
        raise ValidationError(f"time must be non-negative, got {t}")
    decomp = decomp if decomp is not None else eig_unitary(u)
    rt = rate * t
    return matrix_function(decomp, lambda z: np.exp(rt * (z - 1.0)))


def poisson_series(u: UnitaryOperator, rate: float, t: float, n_terms: int = 40) -> np.ndarray:
    """Truncated series ``sum_{n<=N} e^{-rt}(rt)^n/n! U^n`` by repeated products."""
    rt = rate * t
    term = np.eye(u.dim, dtype=np.complex128)
    weight = math.exp(-rt)
    acc = weight * term
    for n in range(1, n_terms + 1):
        term = term @ u.matrix
        weight *= rt / n
        acc = acc + weight * term
    return acc


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Atoms ``(theta_k, weight_k)`` on the circle."""

    thetas: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        th = np.array(self.thetas, dtype=float)
        w = np.array(self.weights, dtype=float)
        if th.shape != w.shape:
            raise ValidationError("thetas and weights differ in length")
        if np.any(w < 0):
            raise ValidationError("measure weights must be non-negative")
        th.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "thetas", th)
        object.__setattr__(self, "weights", w)

    @property
    def total(self) -> float:
        return math.fsum(self.weights)

    @property
    def atoms(self):
        return list(zip(self.thetas.tolist(), self.weights.tolist()))

    def integrate(self, f: Callable) -> complex:
        """``sum_k f(e^{i theta_k}) w_k`` for a function of the unit-circle point."""
        z = np.exp(1j * self.thetas)
        return complex(np.sum(np.asarray([f(x) for x in z]) * self.weights))

    def effective_atoms(self, tol=1e-12):
        keep = self.weights > tol
        return list(zip(self.thetas[keep].tolist(), self.weights[keep].tolist()))


def spectral_measure(
    u: UnitaryOperator, h, decomp: SpectralDecomposition | None = None
) -> DiscreteMeasure:
    """Spectral measure of ``h``: atoms at eigenphases with weights ``|<v_k, h>|^2``."""
    h = np.asarray(h, dtype=np.complex128).ravel()
    if h.shape != (u.dim,):
        raise ValidationError(f"vector has length {h.size}, operator has dim {u.dim}")
    norm2 = float(np.vdot(h, h).real)
    if norm2 == 0.0:
        raise ValidationError("spectral measure of the zero vector is undefined")
    decomp = decomp if decomp is not None else eig_unitary(u)
    weights = np.abs(decomp.eigenvectors.conj().T @ h) ** 2
    measure = DiscreteMeasure(decomp.phases, weights)
    if abs(measure.total - norm2) > RECONSTRUCTION_TOL * max(1.0, norm2):
        raise ValidationError("spectral weights do not sum to the squared norm")
    return measure


def quadratic_form(m, h) -> complex:
    """``(M h | h) = h^H M h``."""
    h = np.asarray(h, dtype=np.complex128).ravel()
    return complex(np.vdot(h, np.asarray(m) @ h))


class ProjectionJump(NamedTuple):
    time: float
    projector: ProjectionOperator
    cell: int


def _mark_cells(projectors, count, rng):
    dim = projectors[0].dim
    probs = np.array([p.rank for p in projectors], dtype=float) / dim
    return rng.choice(len(projectors), size=count, p=probs)


def projection_poisson_path(
    u: UnitaryOperator,
    partition: Sequence[BorelArc],
    cfg: PoissonConfig,
    stream: Sequence[int] = (),
    projectors: Sequence[ProjectionOperator] | None = None,
) -> list[ProjectionJump]:
    """Mark each jump of a Poisson path with a partition cell's projector.

    Cells are drawn with probability ``rank(P_j) / dim``.
    """
    if projectors is None:
        projectors = resolution_of_identity(u, partition)
    path = sample_poisson_path(cfg, stream)
    cells = _mark_cells(projectors, path.count, make_rng(cfg.seed, _MARKS, *stream))
    return [
        ProjectionJump(float(t), projectors[c], int(c)) for t, c in zip(path.jump_times, cells)
    ]


@dataclass
class SigmaAdditivityReport:
    defects: list = field(default_factory=list)
    tolerance: float = ADDITIVITY_DEFECT_TOL

    @property
    def trials(self) -> int:
        return len(self.defects)

    @property
    def max_defect(self) -> float:
        return max(self.defects) if self.defects else 0.0

    @property
    def pass_fraction(self) -> float:
        if not self.defects:
            return 1.0
        return sum(d <= self.tolerance for d in self.defects) / len(self.defects)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "max_defect": self.max_defect,
            "pass_fraction": self.pass_fraction,
            "defects": list(self.defects),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def union_projector(decomp: SpectralDecomposition, arcs: Sequence[BorelArc]) -> np.ndarray:
    """Projector onto eigenvectors whose phase lies in any of ``arcs``."""
    phases = decomp.phases
    mask = np.zeros(phases.shape, dtype=bool)
    for arc in arcs:
        mask |= arc.contains(phases)
    return _projector_from_columns(decomp.eigenvectors[:, mask]).matrix


def sigma_additivity_test(
    u: UnitaryOperator,
    partition: Sequence[BorelArc],
    trials: int,
    cfg: PoissonConfig,
    threads: int = 1,
) -> SigmaAdditivityReport:
    """Monte-Carlo additivity check of the spectral projection-valued measure.

    Each trial runs a projection-valued Poisson path on its own sub-stream and
    collects the cells it visits. The projector of the union of those arcs,
    built directly from eigenphase membership, is compared in operator norm
    with the sum of the individual cell projectors.
    """
    if trials < 1:
        raise ValidationError("trials must be positive")
    decomp = eig_unitary(u)
    projectors = resolution_of_identity(u, partition, decomp)

    def one(trial):
        jumps = projection_poisson_path(u, partition, cfg, (_TRIALS, trial), projectors)
        cells = sorted({j.cell for j in jumps})
        direct = union_projector(decomp, [partition[c] for c in cells])
        summed = sum((projectors[c].matrix for c in cells), np.zeros_like(direct))
        return float(np.linalg.norm(direct - summed, 2))

    return SigmaAdditivityReport(pmap(one, range(trials), threads))
