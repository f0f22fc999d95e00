"""Finite-dimensional operator core.

Hermitian and unitary operators, their spectral decompositions, the Cayley
transform between them, and projection-valued measures over half-open arcs
of the unit circle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from .errors import DomainError, NumericalError, ValidationError
from .tolerances import (
    ARC_ENDPOINT_TOL,
    ARC_SNAP_TOL,
    CAYLEY_SINGULAR_TOL,
    COMPLETENESS_TOL,
    HERMITIAN_TOL,
    IDEMPOTENT_TOL,
    ORTHONORMAL_TOL,
    RECONSTRUCTION_TOL,
    UNITARY_TOL,
)

TWO_PI = 2.0 * math.pi

__all__ = [
    "BorelArc",
    "HermitianOperator",
    "ProjectionOperator",
    "SpectralDecomposition",
    "UnitaryOperator",
    "as_complex_matrix",
    "cayley_transform",
    "eig_hermitian",
    "eig_unitary",
    "equal_arcs",
    "inverse_cayley",
    "matrix_function",
    "matrix_from_json",
    "matrix_to_json",
    "max_abs",
    "random_hermitian",
    "random_partition",
    "random_unitary",
    "read_matrix",
    "resolution_of_identity",
    "spectral_projector",
    "write_matrix",
]


def max_abs(a):
    """Entry-wise max norm."""
    a = np.asarray(a)
    return float(np.max(np.abs(a))) if a.size else 0.0


def as_complex_matrix(m) -> np.ndarray:
    """Validate a square, finite matrix and return a read-only complex copy."""
    arr = np.array(m, dtype=np.complex128)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] < 1:
        raise ValidationError(f"expected a non-empty square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("matrix has non-finite entries")
    arr.setflags(write=False)
    return arr


def _frozen(a) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        defect = max_abs(m - m.conj().T)
        if defect > HERMITIAN_TOL:
            raise ValidationError(f"matrix is not self-adjoint (defect {defect:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class UnitaryOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        defect = max_abs(m.conj().T @ m - np.eye(m.shape[0]))
        if defect > UNITARY_TOL:
            raise ValidationError(f"matrix is not unitary (defect {defect:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class ProjectionOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        sa = max_abs(m - m.conj().T)
        if sa > HERMITIAN_TOL:
            raise ValidationError(f"projector is not self-adjoint (defect {sa:.3e})")
        idem = max_abs(m @ m - m)
        if idem > IDEMPOTENT_TOL:
            raise ValidationError(f"projector is not idempotent (defect {idem:.3e})")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return int(round(np.trace(self.matrix).real))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues and orthonormal eigenvectors (columns) of a normal matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.eigenvalues)
        vecs = _frozen(np.asarray(self.eigenvectors, dtype=np.complex128))
        if vecs.ndim != 2 or vecs.shape[0] != vecs.shape[1] or vals.shape != (vecs.shape[1],):
            raise ValidationError("eigenvalue/eigenvector shapes do not match")
        defect = max_abs(vecs.conj().T @ vecs - np.eye(vecs.shape[1]))
        if defect > ORTHONORMAL_TOL:
            raise NumericalError(f"eigenvectors are not orthonormal (defect {defect:.3e})", defect)
        object.__setattr__(self, "eigenvalues", vals)
        object.__setattr__(self, "eigenvectors", vecs)

    @property
    def dim(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def phases(self) -> np.ndarray:
        """Eigenphases in [0, 2pi), for decompositions of unitaries."""
        return canonical_phase(np.angle(self.eigenvalues))

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def canonical_phase(theta):
    """Reduce angles to [0, 2pi); values within the snap tolerance of 2pi become 0."""
    theta = np.mod(np.asarray(theta, dtype=float), TWO_PI)
    return np.where(theta > TWO_PI - ARC_SNAP_TOL, 0.0, theta)


def _reorthogonalize_clusters(vals, vecs, tol=1e-8):
    """Re-orthonormalize eigenvectors within clusters of (near-)equal eigenvalues."""
    vecs = vecs.copy()
    n = len(vals)
    start = 0
    order = np.argsort(vals.real if np.isrealobj(vals) else np.angle(vals))
    ordered = list(order)
    while start < n:
        stop = start + 1
        while stop < n and abs(vals[ordered[stop]] - vals[ordered[start]]) <= tol:
            stop += 1
        if stop - start > 1:
            idx = ordered[start:stop]
            q, _ = np.linalg.qr(vecs[:, idx])
            vecs[:, idx] = q
        start = stop
    return vecs


def _check_reconstruction(decomp, m):
    residual = max_abs(decomp.reconstruct() - m)
    if residual > RECONSTRUCTION_TOL:
        raise NumericalError(f"eigen-solver residual too large ({residual:.3e})", residual)


def eig_hermitian(h: HermitianOperator) -> SpectralDecomposition:
    """Eigendecomposition with real eigenvalues sorted ascending."""
    try:
        vals, vecs = np.linalg.eigh(h.matrix)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigh did not converge: {exc}", float("inf")) from exc
    vecs = _reorthogonalize_clusters(vals, vecs)
    decomp = SpectralDecomposition(vals, vecs)
    _check_reconstruction(decomp, h.matrix)
    return decomp


def eig_unitary(u: UnitaryOperator) -> SpectralDecomposition:
    """Eigendecomposition of a unitary via the complex Schur form.

    For a normal matrix the Schur factor is diagonal and the Schur vectors are
    orthonormal eigenvectors, including inside degenerate clusters.
    Eigenvalues are renormalized to unit modulus and ordered by eigenphase.
    """
    try:
        t, z = scipy.linalg.schur(u.matrix, output="complex")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalError(f"Schur decomposition failed: {exc}", float("inf")) from exc
    vals = np.diag(t).copy()
    vals /= np.abs(vals)
    order = np.argsort(canonical_phase(np.angle(vals)), kind="stable")
    decomp = SpectralDecomposition(vals[order], z[:, order])
    _check_reconstruction(decomp, u.matrix)
    return decomp


def matrix_function(decomp: SpectralDecomposition, f: Callable) -> np.ndarray:
    """Return ``V diag(f(lambda)) V^H``.

    Raises DomainError when ``f`` is undefined (non-finite) at some eigenvalue.
    """
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        fvals = np.asarray([f(x) for x in decomp.eigenvalues])
    if not np.all(np.isfinite(fvals)):
        bad = decomp.eigenvalues[~np.isfinite(fvals)]
        raise DomainError(f"function undefined at eigenvalue(s) {bad.tolist()}")
    v = decomp.eigenvectors
    out = (v * fvals) @ v.conj().T
    out.setflags(write=False)
    return out


def cayley_transform(h: HermitianOperator) -> UnitaryOperator:
    """Map a Hermitian operator to ``(H - iI)(H + iI)^-1``."""
    eye = np.eye(h.dim)
    denom = h.matrix + 1j * eye
    cond = np.linalg.cond(denom)
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(f"H + iI is ill-conditioned (cond {cond:.3e})", cond)
    # numerator and denominator commute, so a left solve is exact
    u = np.linalg.solve(denom, h.matrix - 1j * eye)
    return UnitaryOperator(u)


def inverse_cayley(u: UnitaryOperator) -> HermitianOperator:
    """Return ``i(I + U)(I - U)^-1``; fails when -1 is (nearly) an eigenvalue."""
    vals = np.linalg.eigvals(u.matrix)
    gap = float(np.min(np.abs(vals + 1.0)))
    if gap <= CAYLEY_SINGULAR_TOL:
        raise NumericalError(
            f"spectrum touches the singular point -1 (distance {gap:.3e})", gap
        )
    eye = np.eye(u.dim)
    h = 1j * np.linalg.solve(eye - u.matrix, eye + u.matrix)
    return HermitianOperator(0.5 * (h + h.conj().T))


@dataclass(frozen=True)
class BorelArc:
    """Half-open arc ``[theta_lo, theta_hi)`` of eigenphases."""

    theta_lo: float
    theta_hi: float

    def __post_init__(self):
        lo, hi = float(self.theta_lo), float(self.theta_hi)
        if not (0.0 <= lo < hi <= TWO_PI + ARC_ENDPOINT_TOL):
            raise ValidationError(f"invalid arc [{lo}, {hi}): need 0 <= lo < hi <= 2pi")
        object.__setattr__(self, "theta_lo", lo)
        object.__setattr__(self, "theta_hi", min(hi, TWO_PI))

    def contains(self, theta) -> np.ndarray:
        """Membership of canonical phases, after snapping to the endpoints."""
        theta = canonical_phase(theta)
        theta = np.where(np.abs(theta - self.theta_lo) <= ARC_SNAP_TOL, self.theta_lo, theta)
        theta = np.where(np.abs(theta - self.theta_hi) <= ARC_SNAP_TOL, self.theta_hi, theta)
        return (theta >= self.theta_lo) & (theta < self.theta_hi)

    def to_list(self):
        return [self.theta_lo, self.theta_hi]


def equal_arcs(k: int) -> list[BorelArc]:
    edges = np.linspace(0.0, TWO_PI, k + 1)
    edges[-1] = TWO_PI
    return [BorelArc(edges[i], edges[i + 1]) for i in range(k)]


def random_partition(k: int, rng) -> list[BorelArc]:
    """Partition of [0, 2pi) into ``k`` arcs with uniformly random cut points."""
    cuts = np.sort(rng.uniform(0.0, TWO_PI, size=k - 1))
    edges = np.concatenate([[0.0], cuts, [TWO_PI]])
    return [BorelArc(edges[i], edges[i + 1]) for i in range(k)]


def _projector_from_columns(vecs) -> ProjectionOperator:
    p = vecs @ vecs.conj().T
    return ProjectionOperator(0.5 * (p + p.conj().T))


def spectral_projector(
    u: UnitaryOperator, arc: BorelArc, decomp: SpectralDecomposition | None = None
) -> ProjectionOperator:
    """Sum of eigenprojectors of ``u`` whose eigenphase lies in ``arc``."""
    decomp = decomp if decomp is not None else eig_unitary(u)
    mask = arc.contains(decomp.phases)
    return _projector_from_columns(decomp.eigenvectors[:, mask])


def validate_partition(partition: Sequence[BorelArc]) -> list[int]:
    """Check that arcs tile [0, 2pi) and return their indices sorted by start."""
    if not partition:
        raise ValidationError("partition is empty")
    order = sorted(range(len(partition)), key=lambda i: partition[i].theta_lo)
    first, last = partition[order[0]], partition[order[-1]]
    if first.theta_lo > ARC_ENDPOINT_TOL:
        raise ValidationError(
            f"partition does not cover [0, {first.theta_lo}): arc {order[0]} starts late"
        )
    if last.theta_hi < TWO_PI - ARC_ENDPOINT_TOL:
        raise ValidationError(
            f"partition does not cover [{last.theta_hi}, 2pi): arc {order[-1]} ends early"
        )
    for a, b in zip(order, order[1:]):
        hi, lo = partition[a].theta_hi, partition[b].theta_lo
        if lo < hi - ARC_ENDPOINT_TOL:
            raise ValidationError(f"arcs {a} and {b} overlap on [{lo}, {hi})")
        if lo > hi + ARC_ENDPOINT_TOL:
            raise ValidationError(f"gap [{hi}, {lo}) between arcs {a} and {b} is not covered")
    return order


def cell_index(partition: Sequence[BorelArc], phases) -> np.ndarray:
    """Index of the partition cell holding each phase (partition must be valid)."""
    order = validate_partition(partition)
    starts = np.array([partition[i].theta_lo for i in order])
    starts[0] = 0.0
    phases = canonical_phase(phases)
    # snap phases lying on a cell boundary onto it so [lo, hi) decides
    for s in starts[1:]:
        phases = np.where(np.abs(phases - s) <= ARC_SNAP_TOL, s, phases)
    pos = np.searchsorted(starts, phases, side="right") - 1
    return np.asarray(order)[pos]


def resolution_of_identity(
    u: UnitaryOperator,
    partition: Sequence[BorelArc],
    decomp: SpectralDecomposition | None = None,
) -> list[ProjectionOperator]:
    """One spectral projector per arc; the projectors sum to the identity."""
    decomp = decomp if decomp is not None else eig_unitary(u)
    cells = cell_index(partition, decomp.phases)
    projectors = [
        _projector_from_columns(decomp.eigenvectors[:, cells == j]) for j in range(len(partition))
    ]
    total = sum(p.matrix for p in projectors)
    defect = max_abs(total - np.eye(u.dim))
    if defect > COMPLETENESS_TOL:
        raise NumericalError(f"projectors do not resolve the identity ({defect:.3e})", defect)
    return projectors


def random_hermitian(dim: int, rng, scale: float = 1.0) -> HermitianOperator:
    """GUE-like sample rescaled to spectral norm ``scale``."""
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    h = 0.5 * (a + a.conj().T)
    h *= scale / np.linalg.norm(h, 2)
    return HermitianOperator(0.5 * (h + h.conj().T))


def random_unitary(dim: int, rng) -> UnitaryOperator:
    """Haar-distributed unitary (QR of a Ginibre matrix with phase fix)."""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return UnitaryOperator(q * (d / np.abs(d)))


# -- matrix file format -------------------------------------------------------


def matrix_from_json(obj) -> np.ndarray:
    """Parse ``{"dim": n, "re": [[...]], "im": [[...]]}`` into a complex matrix."""
    if not isinstance(obj, dict):
        raise ValidationError("matrix: expected a JSON object")
    for key in ("dim", "re", "im"):
        if key not in obj:
            raise ValidationError(f"matrix: missing field '{key}'")
    dim = obj["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ValidationError(f"matrix: field 'dim' must be a positive integer, got {dim!r}")
    parts = []
    for key in ("re", "im"):
        try:
            arr = np.array(obj[key], dtype=float)
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"matrix: field '{key}' is not a numeric array ({exc})") from exc
        if arr.shape != (dim, dim):
            raise ValidationError(
                f"matrix: field '{key}' has shape {arr.shape}, expected ({dim}, {dim})"
            )
        if not np.all(np.isfinite(arr)):
            raise ValidationError(f"matrix: field '{key}' has non-finite entries")
        parts.append(arr)
    return parts[0] + 1j * parts[1]


def matrix_to_json(m) -> dict:
    m = np.asarray(m, dtype=np.complex128)
    return {"dim": int(m.shape[0]), "re": m.real.tolist(), "im": m.imag.tolist()}


def read_matrix(path) -> np.ndarray:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}:{exc.lineno}: invalid JSON ({exc.msg})") from exc
    try:
        return matrix_from_json(obj)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def write_matrix(path, m) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(m)))
