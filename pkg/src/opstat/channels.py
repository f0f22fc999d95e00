"""Finite-dimensional quantum channels and Holevo information.

Information quantities are in bits. Channels are stored in Kraus form as an
array of shape ``(n_kraus, dim_out, dim_in)``.

The capacity and minimum-output-entropy optimizers search over pure-state
inputs (``psi = z / |z|`` for unconstrained complex ``z``, probabilities as a
softmax of free logits) with L-BFGS and analytic gradients. The gradient of
Holevo information ``chi = sum_i p_i D(sigma_i || rho_bar)`` is

    d chi / d p_i   = D(sigma_i || rho_bar) - 1/ln 2
    d chi / d psi_i = 2 p_i N*(log2 sigma_i - log2 rho_bar) psi_i

where ``N*`` is the adjoint channel. Logarithms of zero eigenvalues are
floored, which only touches directions the perturbation cannot reach.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ValidationError
from .operators import as_complex_matrix, matrix_from_json, matrix_to_json, max_abs
from .parallel import pmap
from .rng import make_rng
from .tolerances import HERMITIAN_TOL, PROB_SUM_TOL, PSD_CLAMP_TOL, TRACE_TOL

LN2 = math.log(2.0)
_LOG_FLOOR = 1e-300

VERDICT_ADDITIVE = "additive_within_tolerance"
VERDICT_SUPERADDITIVE = "superadditive_signal"
VERDICT_INCONCLUSIVE = "inconclusive"


# -- states -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        m = as_complex_matrix(self.matrix)
        herm = max_abs(m - m.conj().T)
        if herm > HERMITIAN_TOL:
            raise ValidationError(f"density matrix is not Hermitian (defect {herm:.3e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValidationError(f"density matrix has trace {tr!r}")
        lo = float(np.linalg.eigvalsh(m)[0])
        if lo < -PSD_CLAMP_TOL:
            raise ValidationError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def pure(cls, psi) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=np.complex128).ravel()
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def maximally_mixed(cls, dim: int) -> "DensityMatrix":
        return cls(np.eye(dim) / dim)

    def kron(self, other: "DensityMatrix") -> "DensityMatrix":
        return DensityMatrix(np.kron(self.matrix, other.matrix))


def _hermitize(m):
    return 0.5 * (m + np.swapaxes(m, -1, -2).conj())


@dataclass(frozen=True, eq=False)
class Ensemble:
    probs: np.ndarray
    states: tuple

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in self.states)
        if p.ndim != 1 or p.size != len(states) or p.size == 0:
            raise ValidationError("ensemble needs one probability per state")
        if np.any(p < 0) or abs(math.fsum(p) - 1.0) > PROB_SUM_TOL:
            raise ValidationError("ensemble probabilities must be a distribution")
        if len({s.dim for s in states}) != 1:
            raise ValidationError("ensemble states differ in dimension")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "states", states)

    @property
    def dim(self) -> int:
        return self.states[0].dim

    @classmethod
    def from_vectors(cls, probs, vectors) -> "Ensemble":
        probs = np.asarray(probs, dtype=float)
        probs = probs / math.fsum(probs)
        return cls(probs, tuple(DensityMatrix.pure(v) for v in vectors))


# -- channels -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuantumChannel:
    kraus: np.ndarray
    name: str = ""

    def __post_init__(self):
        k = np.array(self.kraus, dtype=np.complex128)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValidationError("Kraus operators must form a non-empty (n, dim_out, dim_in) array")
        if not np.all(np.isfinite(k)):
            raise ValidationError("Kraus operators have non-finite entries")
        defect = max_abs(np.einsum("kai,kaj->ij", k.conj(), k) - np.eye(k.shape[2]))
        if defect > TRACE_TOL:
            raise ValidationError(f"channel is not trace preserving (defect {defect:.3e})")
        k.setflags(write=False)
        object.__setattr__(self, "kraus", k)

    @property
    def dim_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def dim_out(self) -> int:
        return self.kraus.shape[1]

    def apply(self, rho) -> np.ndarray:
        """Action on a matrix or a stack of matrices ``(..., dim_in, dim_in)``."""
        k = self.kraus
        return np.einsum("kai,...ij,kbj->...ab", k, rho, k.conj())

    def adjoint(self, g) -> np.ndarray:
        """Heisenberg-picture action ``sum_k K^H g K`` (stackable)."""
        k = self.kraus
        return np.einsum("kai,...ab,kbj->...ij", k.conj(), g, k)

    def to_json(self) -> dict:
        return {
            "dim_in": self.dim_in,
            "dim_out": self.dim_out,
            "kraus": [matrix_to_json(m) if m.shape[0] == m.shape[1] else _rect_to_json(m)
                      for m in self.kraus],
        }


def _rect_to_json(m):
    return {"rows": int(m.shape[0]), "cols": int(m.shape[1]),
            "re": m.real.tolist(), "im": m.imag.tolist()}


def channel_from_json(obj, name="") -> QuantumChannel:
    """Parse ``{"dim_in": n, "dim_out": m, "kraus": [matrix, ...]}``."""
    for key in ("dim_in", "dim_out", "kraus"):
        if key not in obj:
            raise ValidationError(f"channel: missing field '{key}'")
    din, dout = obj["dim_in"], obj["dim_out"]
    if not obj["kraus"]:
        raise ValidationError("channel: field 'kraus' is empty")
    mats = []
    for i, entry in enumerate(obj["kraus"]):
        try:
            if din == dout:
                m = matrix_from_json(entry)
            else:
                m = np.array(entry["re"], dtype=float) + 1j * np.array(entry["im"], dtype=float)
        except (ValidationError, KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"channel: kraus[{i}]: {exc}") from exc
        if m.shape != (dout, din):
            raise ValidationError(f"channel: kraus[{i}] has shape {m.shape}, expected ({dout}, {din})")
        mats.append(m)
    return QuantumChannel(np.array(mats), name=name)


def read_channel(path) -> QuantumChannel:
    obj = json.loads(Path(path).read_text())
    try:
        return channel_from_json(obj, name=Path(path).stem)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from exc


def identity_channel(dim: int = 2) -> QuantumChannel:
    return QuantumChannel(np.eye(dim)[None], name=f"id{dim}")


def _weyl_operators(dim):
    shift = np.roll(np.eye(dim), 1, axis=0)
    clock = np.diag(np.exp(2j * np.pi * np.arange(dim) / dim))
    return [np.linalg.matrix_power(shift, a) @ np.linalg.matrix_power(clock, b)
            for a in range(dim) for b in range(dim)]


def depolarizing_channel(p: float, dim: int = 2) -> QuantumChannel:
    """``rho -> (1 - p) rho + p tr(rho) I / dim``, with ``0 <= p <= 1``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"depolarizing parameter must lie in [0, 1], got {p}")
    ops = _weyl_operators(dim)
    weights = [p / dim**2] * len(ops)
    weights[0] += 1.0 - p
    return QuantumChannel(np.array([math.sqrt(w) * u for w, u in zip(weights, ops)]),
                          name=f"depol{dim}({p:g})")


def completely_depolarizing_channel(dim: int = 2) -> QuantumChannel:
    return depolarizing_channel(1.0, dim)


def dephasing_channel(p: float) -> QuantumChannel:
    """Qubit dephasing with Kraus set ``{sqrt(1-p) I, sqrt(p) Z}``."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"dephasing parameter must lie in [0, 1], got {p}")
    z = np.diag([1.0, -1.0])
    return QuantumChannel(np.array([math.sqrt(1 - p) * np.eye(2), math.sqrt(p) * z]),
                          name=f"dephase({p:g})")


def random_channel(dim: int, kraus_count: int, seed, stream=()) -> QuantumChannel:
    """Channel from a Haar-random isometry ``C^dim -> C^(dim * kraus_count)``."""
    if dim < 1 or kraus_count < 1:
        raise ValidationError("dim and kraus_count must be positive")
    rng = make_rng(seed, *stream)
    n = dim * kraus_count
    z = (rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    v = q * (d / np.abs(d))
    return QuantumChannel(v.reshape(kraus_count, dim, dim), name=f"rand{dim}x{kraus_count}")


def tensor_channel(a: QuantumChannel, b: QuantumChannel) -> QuantumChannel:
    """Kraus set ``{A_i (x) B_j}``."""
    ka, kb = a.kraus, b.kraus
    k = np.einsum("iab,jcd->ijacbd", ka, kb).reshape(
        ka.shape[0] * kb.shape[0], a.dim_out * b.dim_out, a.dim_in * b.dim_in
    )
    name = f"{a.name}*{b.name}" if a.name or b.name else ""
    return QuantumChannel(k, name=name)


def apply_channel(ch: QuantumChannel, rho: DensityMatrix) -> DensityMatrix:
    if rho.dim != ch.dim_in:
        raise ValidationError(f"state has dim {rho.dim}, channel expects {ch.dim_in}")
    return DensityMatrix(_hermitize(ch.apply(rho.matrix)))


# -- entropy and Holevo information -------------------------------------------


def entropy_from_eigenvalues(eigs) -> np.ndarray:
    """Shannon entropy (bits) along the last axis, clamping roundoff negatives."""
    eigs = np.asarray(eigs, dtype=float)
    if np.any(eigs < -PSD_CLAMP_TOL):
        raise ValidationError(f"eigenvalue {eigs.min():.3e} is below the clamping tolerance")
    eigs = np.clip(eigs, 0.0, None)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(eigs > 0, -eigs * np.log2(np.where(eigs > 0, eigs, 1.0)), 0.0)
    return terms.sum(axis=-1)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """``-tr rho log2 rho``."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return max(0.0, float(entropy_from_eigenvalues(np.linalg.eigvalsh(m))))


def holevo_chi(ch: QuantumChannel, ens: Ensemble) -> float:
    """``S(sum p_i N(rho_i)) - sum p_i S(N(rho_i))``."""
    if ens.dim != ch.dim_in:
        raise ValidationError(f"ensemble has dim {ens.dim}, channel expects {ch.dim_in}")
    outs = _hermitize(ch.apply(np.array([s.matrix for s in ens.states])))
    avg = np.einsum("i,iab->ab", ens.probs, outs)
    s_avg = entropy_from_eigenvalues(np.linalg.eigvalsh(_hermitize(avg)))
    s_each = entropy_from_eigenvalues(np.linalg.eigvalsh(outs))
    return max(0.0, float(s_avg - ens.probs @ s_each))


def _log2_and_entropy(mats):
    """Matrix log2 (floored) and entropy for a stack of PSD matrices."""
    w, v = np.linalg.eigh(mats)
    w = np.clip(w, 0.0, None)
    logw = np.log2(np.maximum(w, _LOG_FLOOR))
    ent = -(w * logw).sum(axis=-1)
    log_m = np.einsum("...ak,...k,...bk->...ab", v, logw, v.conj())
    return log_m, ent


def _split(x, m, d):
    z = x[: 2 * m * d].reshape(2, m, d)
    return z[0] + 1j * z[1], x[2 * m * d:]


def _softmax(w):
    e = np.exp(w - w.max())
    return e / e.sum()


def _chi_and_grad(x, ch, m, d):
    z, logits = _split(x, m, d)
    r = np.linalg.norm(z, axis=1)
    psi = z / r[:, None]
    p = _softmax(logits)
    phi = np.einsum("kai,mi->mka", ch.kraus, psi)
    sigma = np.einsum("mka,mkb->mab", phi, phi.conj())
    rho_bar = np.einsum("m,mab->ab", p, sigma)
    log_bar, s_bar = _log2_and_entropy(rho_bar)
    log_each, s_each = _log2_and_entropy(sigma)
    cross = np.einsum("mab,ba->m", sigma, log_bar).real
    rel = -s_each - cross
    chi = float(p @ rel)
    g_logits = p * (rel - chi)
    gmat = log_each - log_bar[None]
    mpsi = np.einsum("kbi,mba,mka->mi", ch.kraus.conj(), gmat, phi)
    expect = np.einsum("mi,mi->m", psi.conj(), mpsi).real
    g = 2.0 * p[:, None] * (mpsi - expect[:, None] * psi) / r[:, None]
    grad = np.concatenate([g.real.ravel(), g.imag.ravel(), g_logits])
    return chi, grad


def _entropy_and_grad(x, ch, d):
    z = x[:d] + 1j * x[d:]
    r = np.linalg.norm(z)
    psi = z / r
    phi = ch.kraus @ psi
    sigma = np.einsum("ka,kb->ab", phi, phi.conj())
    log_s, s = _log2_and_entropy(sigma)
    mpsi = -np.einsum("kbi,ba,ka->i", ch.kraus.conj(), log_s, phi)
    expect = np.vdot(psi, mpsi).real
    g = 2.0 * (mpsi - expect * psi) / r
    return float(s), np.concatenate([g.real, g.imag])


@dataclass(frozen=True)
class OptimizerConfig:
    ensemble_size: int | None = None
    restarts: int = 16
    max_iters: int = 500
    tolerance: float = 1e-5
    seed: int = 0
    threads: int = 1

    def size_for(self, ch: QuantumChannel) -> int:
        return self.ensemble_size if self.ensemble_size else ch.dim_in**2


@dataclass
class OptimizationResult:
    value: float
    converged: bool
    restart_values: list = field(default_factory=list)
    ensemble: Ensemble | None = None
    vectors: np.ndarray | None = None
    probs: np.ndarray | None = None
    state: np.ndarray | None = None
    history: list = field(default_factory=list)

    def __iter__(self):
        # unpacks as (value, argmax)
        yield self.value
        yield self.ensemble if self.ensemble is not None else self.state


def _run_lbfgs(fun, x0, max_iters, sign):
    history = []
    best = [math.inf]

    def wrapped(x):
        f, g = fun(x)
        return sign * f, sign * g

    def callback(xk):
        f, _ = fun(xk)
        best[0] = min(best[0], sign * f)
        history.append(sign * best[0])

    res = minimize(
        wrapped, x0, jac=True, method="L-BFGS-B", callback=callback,
        options={"maxiter": max_iters, "ftol": 1e-15, "gtol": 1e-11, "maxcor": 30},
    )
    # status 1 means the iteration cap was hit
    return res, res.status != 1, history


def _initial_ensemble_point(vectors, probs):
    vectors = np.asarray(vectors, dtype=np.complex128)
    probs = np.asarray(probs, dtype=float)
    logits = np.log(np.maximum(probs, 1e-12))
    return np.concatenate([vectors.real.ravel(), vectors.imag.ravel(), logits])


def holevo_capacity(
    ch: QuantumChannel, opt: OptimizerConfig = OptimizerConfig(), initial=None, stream=()
) -> OptimizationResult:
    """Maximize Holevo information over pure-state ensembles.

    ``initial`` optionally adds a warm start ``(vectors, probs)``; it is run
    in addition to the ``opt.restarts`` random starts. The best restart wins,
    and a run that hits ``max_iters`` without stopping is flagged unconverged.
    """
    d = ch.dim_in
    m = opt.size_for(ch)
    if initial is not None:
        m = max(m, len(initial[1]))

    def start(i):
        if i < 0:
            vecs, probs = initial
            vecs = np.asarray(vecs)
            pad = m - len(probs)
            if pad:
                rng = make_rng(opt.seed, *stream, 1 << 20)
                extra = rng.standard_normal((pad, d)) + 1j * rng.standard_normal((pad, d))
                vecs = np.vstack([vecs, extra])
                probs = np.concatenate([probs, np.full(pad, 1e-12)])
            return _initial_ensemble_point(vecs, probs)
        rng = make_rng(opt.seed, *stream, i)
        z = rng.standard_normal((2, m, d)).ravel()
        return np.concatenate([z, rng.standard_normal(m) * 0.1])

    def run(i):
        res, ok, hist = _run_lbfgs(lambda x: _chi_and_grad(x, ch, m, d), start(i), opt.max_iters, -1.0)
        return res, ok, hist

    ids = list(range(opt.restarts)) + ([-1] if initial is not None else [])
    runs = pmap(run, ids, opt.threads)
    values = [_chi_and_grad(r.x, ch, m, d)[0] for r, _, _ in runs]
    best = int(np.argmax(values))
    res, ok, hist = runs[best]
    z, logits = _split(res.x, m, d)
    vecs = z / np.linalg.norm(z, axis=1)[:, None]
    probs = _softmax(logits)
    ens = Ensemble.from_vectors(probs, vecs)
    value = max(0.0, min(values[best], math.log2(ch.dim_out)))
    return OptimizationResult(
        value=value, converged=ok, restart_values=values, ensemble=ens,
        vectors=vecs, probs=probs, history=hist,
    )


def min_output_entropy(
    ch: QuantumChannel, opt: OptimizerConfig = OptimizerConfig(), stream=()
) -> OptimizationResult:
    """Minimize the output entropy over pure inputs (multi-restart L-BFGS)."""
    d = ch.dim_in

    def run(i):
        rng = make_rng(opt.seed, *stream, i)
        fun = lambda x: _entropy_and_grad(x, ch, d)  # noqa: E731
        return _run_lbfgs(fun, rng.standard_normal(2 * d), opt.max_iters, 1.0)

    runs = pmap(run, range(opt.restarts), opt.threads)
    values = [_entropy_and_grad(r.x, ch, d)[0] for r, _, _ in runs]
    best = int(np.argmin(values))
    res, ok, hist = runs[best]
    psi = res.x[:d] + 1j * res.x[d:]
    psi /= np.linalg.norm(psi)
    value = min(max(0.0, values[best]), math.log2(ch.dim_out))
    return OptimizationResult(value=value, converged=ok, restart_values=values,
                              state=psi, history=hist)


# -- additivity ---------------------------------------------------------------


@dataclass
class AdditivityReport:
    chi_1: float
    chi_2: float
    chi_joint: float
    optimizer_tolerance: float
    converged: bool = True
    channel_ids: tuple = ("", "")

    @property
    def defect(self) -> float:
        return self.chi_joint - self.chi_1 - self.chi_2

    @property
    def verdict(self) -> str:
        band = 3.0 * self.optimizer_tolerance
        if not self.converged:
            return VERDICT_INCONCLUSIVE
        if abs(self.defect) <= band:
            return VERDICT_ADDITIVE
        if self.defect > band:
            return VERDICT_SUPERADDITIVE
        return VERDICT_INCONCLUSIVE

    @property
    def floor_ok(self) -> bool:
        return self.defect >= -2.0 * self.optimizer_tolerance

    def to_dict(self) -> dict:
        return {
            "channel_a": self.channel_ids[0],
            "channel_b": self.channel_ids[1],
            "chi_1": self.chi_1,
            "chi_2": self.chi_2,
            "chi_joint": self.chi_joint,
            "defect": self.defect,
            "optimizer_tolerance": self.optimizer_tolerance,
            "verdict": self.verdict,
        }


CSV_FIELDS = ["channel_a", "channel_b", "chi_1", "chi_2", "chi_joint", "defect", "verdict"]


def reports_to_csv(reports: Sequence[AdditivityReport]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in reports:
        row = r.to_dict()
        for key in ("chi_1", "chi_2", "chi_joint", "defect"):
            row[key] = repr(row[key])
        writer.writerow(row)
    return buf.getvalue()


def additivity_experiment(
    a: QuantumChannel, b: QuantumChannel, opt: OptimizerConfig = OptimizerConfig(), stream=()
) -> AdditivityReport:
    """Compare the capacity of ``a (x) b`` with the sum of the single capacities.

    The joint search runs ``opt.restarts`` random starts over entangled
    ensembles plus one warm start at the product of the single-channel optima.
    """
    if a.dim_in * b.dim_in > 16:
        raise ValidationError("additivity experiment limited to dim_in(a) * dim_in(b) <= 16")
    ra = holevo_capacity(a, opt, stream=(*stream, 0))
    rb = holevo_capacity(b, opt, stream=(*stream, 1))
    vecs = np.array([np.kron(u, v) for u in ra.vectors for v in rb.vectors])
    probs = np.outer(ra.probs, rb.probs).ravel()
    joint_opt = OptimizerConfig(
        ensemble_size=max(opt.size_for(tensor_channel(a, b)), len(probs)),
        restarts=opt.restarts, max_iters=opt.max_iters, tolerance=opt.tolerance,
        seed=opt.seed, threads=opt.threads,
    )
    rj = holevo_capacity(tensor_channel(a, b), joint_opt, initial=(vecs, probs), stream=(*stream, 2))
    return AdditivityReport(
        chi_1=ra.value, chi_2=rb.value, chi_joint=rj.value,
        optimizer_tolerance=opt.tolerance,
        converged=ra.converged and rb.converged and rj.converged,
        channel_ids=(a.name, b.name),
    )
