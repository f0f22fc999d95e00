"""Fast invariant suite run by ``opstat selftest``.

Tolerances are read from :mod:`opstat.tolerances` at call time so a
corrupted constant shows up as a failing group.
"""
from __future__ import annotations

import numpy as np

from . import __version__, kernels, tolerances
from .channels import (
    DensityMatrix,
    apply_channel,
    random_channel,
    von_neumann_entropy,
)
from .operators import (
    cayley_transform,
    eig_unitary,
    inverse_cayley,
    max_abs,
    random_hermitian,
    random_partition,
    random_unitary,
    resolution_of_identity,
)
from .poisson import poisson_semigroup
from .rng import make_rng


def _projector_axioms(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        h = random_hermitian(4, rng, scale=rng.uniform(0.5, 5.0))
        u = cayley_transform(h)
        parts = random_partition(int(rng.integers(2, 9)), rng)
        # bypass the validating constructors: recompute defects directly
        decomp = eig_unitary(u)
        projs = [p.matrix for p in resolution_of_identity(u, parts, decomp)]
        for p in projs:
            worst = max(worst, max_abs(p @ p - p) / tolerances.IDEMPOTENT_TOL,
                        max_abs(p - p.conj().T) / tolerances.HERMITIAN_TOL)
        worst = max(worst, max_abs(sum(projs) - np.eye(4)) / tolerances.COMPLETENESS_TOL)
    return worst


def _cayley_roundtrip(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        h = random_hermitian(4, rng, scale=rng.uniform(0.5, 5.0))
        back = inverse_cayley(cayley_transform(h))
        worst = max(worst, max_abs(back.matrix - h.matrix) / 1e-7)
    return worst


def _semigroup_law(rng, trials=20):
    worst = 0.0
    for _ in range(trials):
        u = random_unitary(4, rng)
        r, s, t = rng.uniform(0.1, 5.0), rng.uniform(0, 2), rng.uniform(0, 2)
        d = eig_unitary(u)
        lhs = poisson_semigroup(u, r, s, d) @ poisson_semigroup(u, r, t, d)
        worst = max(worst, max_abs(lhs - poisson_semigroup(u, r, s + t, d)) / tolerances.COMPLETENESS_TOL)
        norm = np.linalg.norm(poisson_semigroup(u, r, t, d), 2)
        worst = max(worst, max(0.0, norm - 1.0) / tolerances.UNITARY_TOL)
    return worst


def _entropy_bounds(rng, trials=20):
    worst = 0.0
    for i in range(trials):
        ch = random_channel(3, 2, int(rng.integers(2**32)))
        psi = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        out = apply_channel(ch, DensityMatrix.pure(psi))
        s = von_neumann_entropy(out)
        excess = max(-s, s - np.log2(3), 0.0)
        trace_err = abs(np.trace(out.matrix).real - 1.0)
        worst = max(worst, excess / tolerances.TRACE_TOL, trace_err / tolerances.TRACE_TOL)
    return worst


GROUPS = {
    "projector_axioms": _projector_axioms,
    "cayley_roundtrip": _cayley_roundtrip,
    "semigroup_law": _semigroup_law,
    "entropy_bounds": _entropy_bounds,
}


def run_selftest(seed: int = 0) -> dict:
    """Run every group; a group passes when all defects are within tolerance."""
    groups = {}
    for i, (name, fn) in enumerate(GROUPS.items()):
        try:
            ratio = float(fn(make_rng(seed, i)))
            ok = bool(np.isfinite(ratio) and 0.0 <= ratio <= 1.0)
            groups[name] = {"pass": ok, "worst_ratio": ratio}
        except Exception as exc:  # a crash is a failing group, not a crashed selftest
            groups[name] = {"pass": False, "worst_ratio": None, "error": str(exc)}
    return {
        "version": __version__,
        "backend": kernels.BACKEND,
        "groups": groups,
        "pass": all(g["pass"] for g in groups.values()),
    }
