import ast
import csv
import io
import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import depolarizing_capacity_grid, dephasing_moe_grid
from opstat.channels import (
    AdditivityReport,
    DensityMatrix,
    Ensemble,
    OptimizerConfig,
    QuantumChannel,
    _chi_and_grad,
    additivity_experiment,
    apply_channel,
    channel_from_json,
    completely_depolarizing_channel,
    dephasing_channel,
    depolarizing_channel,
    holevo_capacity,
    holevo_chi,
    identity_channel,
    min_output_entropy,
    random_channel,
    read_channel,
    reports_to_csv,
    tensor_channel,
    von_neumann_entropy,
)
from opstat.errors import ValidationError
from opstat.operators import max_abs, random_unitary
from opstat.rng import make_rng

DATA = Path(__file__).parent / "data"
KET0, KET1 = np.array([1, 0]), np.array([0, 1])
PLUS = np.array([1, 1]) / math.sqrt(2)
FAST = OptimizerConfig(restarts=4, max_iters=300)


def random_state(dim, rng, rank=None):
    rank = rank or dim
    g = rng.standard_normal((dim, rank)) + 1j * rng.standard_normal((dim, rank))
    m = g @ g.conj().T
    return DensityMatrix(m / np.trace(m).real)


# -- types ---------------------------------------------------------------------


def test_density_validation():
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([0.5, 0.6]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.diag([1.5, -0.5]))
    with pytest.raises(ValidationError):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))


def test_ensemble_validation():
    with pytest.raises(ValidationError):
        Ensemble([0.5, 0.6], [np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(ValidationError):
        Ensemble([1.0], [np.eye(2) / 2, np.eye(2) / 2])
    with pytest.raises(ValidationError):
        Ensemble([0.5, 0.5], [np.eye(2) / 2, np.eye(3) / 3])


def test_channel_validation():
    with pytest.raises(ValidationError, match="trace preserving"):
        QuantumChannel(np.array([np.eye(2), np.eye(2)]))
    with pytest.raises(ValidationError):
        depolarizing_channel(1.5)
    with pytest.raises(ValidationError):
        dephasing_channel(-0.1)


def test_channel_json_roundtrip(tmp_path):
    ch = random_channel(2, 3, 4)
    path = tmp_path / "ch.json"
    path.write_text(json.dumps(ch.to_json()))
    back = read_channel(path)
    assert np.array_equal(back.kraus, ch.kraus)
    with pytest.raises(ValidationError, match="dim_out"):
        channel_from_json({"dim_in": 2})
    with pytest.raises(ValidationError, match="kraus"):
        channel_from_json({"dim_in": 2, "dim_out": 2})


# -- apply ------------------------------------------------------------------------


def test_apply_examples():
    rng = make_rng(0)
    rho = random_state(2, rng)
    assert max_abs(apply_channel(identity_channel(2), rho).matrix - rho.matrix) < 1e-15
    out = apply_channel(completely_depolarizing_channel(2), rho)
    assert max_abs(out.matrix - np.eye(2) / 2) < 1e-15
    out = apply_channel(dephasing_channel(0.5), DensityMatrix.pure(PLUS))
    assert max_abs(out.matrix - np.eye(2) / 2) < 1e-15


def test_apply_dimension_mismatch():
    with pytest.raises(ValidationError):
        apply_channel(identity_channel(2), DensityMatrix.maximally_mixed(3))


@given(st.integers(0, 2**32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_channel_axioms(seed, dim, k):
    rng = make_rng(seed)
    ch = random_channel(dim, k, seed)
    out = apply_channel(ch, random_state(dim, rng)).matrix
    assert abs(np.trace(out) - 1) <= 1e-10
    assert np.linalg.eigvalsh(out)[0] >= -1e-9


def test_random_channel_examples():
    u = random_channel(3, 1, 5).kraus[0]
    assert max_abs(u.conj().T @ u - np.eye(3)) < 1e-12
    golden = json.loads((DATA / "random_channel.json").read_text())
    ch = random_channel(golden["dim"], golden["kraus_count"], golden["seed"])
    expected = np.array([[[complex(ast.literal_eval(z)) for z in row] for row in k] for k in golden["kraus"]])
    assert np.array_equal(ch.kraus, expected)
    for s in range(100):
        random_channel(2, 1 + s % 4, s)  # validation is the oracle


@given(st.integers(0, 2**32 - 1))
def test_tensor_naturality(seed):
    rng = make_rng(seed)
    a, b = random_channel(2, 2, seed, (0,)), random_channel(2, 3, seed, (1,))
    r1, r2 = random_state(2, rng), random_state(2, rng)
    lhs = apply_channel(tensor_channel(a, b), r1.kron(r2)).matrix
    rhs = np.kron(apply_channel(a, r1).matrix, apply_channel(b, r2).matrix)
    assert max_abs(lhs - rhs) <= 1e-10


def test_tensor_examples():
    ii = tensor_channel(identity_channel(2), identity_channel(2))
    rho = random_state(4, make_rng(1))
    assert max_abs(apply_channel(ii, rho).matrix - rho.matrix) < 1e-14
    a = random_channel(2, 2, 3)
    r1, r2 = random_state(2, make_rng(2)), random_state(2, make_rng(3))
    out = apply_channel(tensor_channel(a, completely_depolarizing_channel(2)), r1.kron(r2)).matrix
    assert max_abs(out - np.kron(apply_channel(a, r1).matrix, np.eye(2) / 2)) < 1e-14


# -- entropy ---------------------------------------------------------------------------


def test_entropy_examples():
    assert von_neumann_entropy(DensityMatrix.pure(KET0)) == 0.0
    assert abs(von_neumann_entropy(DensityMatrix.maximally_mixed(2)) - 1) < 1e-15
    h = -(0.75 * math.log2(0.75) + 0.25 * math.log2(0.25))
    assert abs(von_neumann_entropy(DensityMatrix(np.diag([0.75, 0.25]))) - h) < 1e-15
    assert abs(h - 0.8112781244591328) < 1e-15


@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_entropy_bounds_and_unitary_invariance(seed, dim):
    rng = make_rng(seed)
    rho = random_state(dim, rng, rank=int(rng.integers(1, dim + 1)))
    s = von_neumann_entropy(rho)
    assert 0 <= s <= math.log2(dim) + 1e-12
    u = random_unitary(dim, rng).matrix
    m = u @ rho.matrix @ u.conj().T
    assert abs(von_neumann_entropy(DensityMatrix(0.5 * (m + m.conj().T))) - s) <= 1e-9


# -- Holevo chi --------------------------------------------------------------------------


def test_chi_examples():
    ens = Ensemble.from_vectors([0.5, 0.5], [KET0, KET1])
    assert abs(holevo_chi(identity_channel(2), ens) - 1) < 1e-14
    single = Ensemble.from_vectors([1.0], [PLUS])
    assert holevo_chi(random_channel(2, 2, 1), single) < 1e-14
    rng = make_rng(4)
    many = Ensemble([0.2, 0.3, 0.5], [random_state(2, rng) for _ in range(3)])
    assert holevo_chi(completely_depolarizing_channel(2), many) < 1e-14


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_chi_bounds(seed, m):
    rng = make_rng(seed)
    ch = random_channel(2, 2, seed)
    probs = rng.dirichlet(np.ones(m))
    ens = Ensemble(probs, [random_state(2, rng) for _ in range(m)])
    chi = holevo_chi(ch, ens)
    outs = [apply_channel(ch, s).matrix for s in ens.states]
    avg = DensityMatrix(sum(p * o for p, o in zip(probs, outs)))
    assert 0 <= chi <= min(1.0, von_neumann_entropy(avg)) + 1e-12


def test_chi_gradient_matches_finite_differences():
    ch = random_channel(2, 2, 8)
    rng = make_rng(8)
    m, d = 4, 2
    x = rng.standard_normal(2 * m * d + m)
    f, g = _chi_and_grad(x, ch, m, d)
    h = 1e-6
    fd = np.array([(_chi_and_grad(x + h * e, ch, m, d)[0] - _chi_and_grad(x - h * e, ch, m, d)[0]) / (2 * h)
                   for e in np.eye(len(x))])
    assert np.max(np.abs(fd - g)) < 1e-7


# -- optimizers -----------------------------------------------------------------------------


def test_capacity_examples():
    assert abs(holevo_capacity(identity_channel(2), FAST).value - 1) <= 1e-4
    assert holevo_capacity(completely_depolarizing_channel(2), FAST).value <= 1e-6


def test_capacity_depolarizing_matches_grid_oracle():
    oracle = depolarizing_capacity_grid(0.5)
    value, ens = holevo_capacity(depolarizing_channel(0.5), FAST)
    assert abs(value - oracle) <= 1e-3
    assert abs(holevo_chi(depolarizing_channel(0.5), ens) - value) <= 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_capacity_beats_orthogonal_bases(seed):
    ch = random_channel(2, 2, seed)
    cap = holevo_capacity(ch, FAST).value
    rng = make_rng(seed, 9)
    for _ in range(5):
        basis = random_unitary(2, rng).matrix
        assert cap >= holevo_chi(ch, Ensemble.from_vectors([0.5, 0.5], basis.T)) - 1e-9


def test_capacity_respects_threads():
    ch = random_channel(2, 2, 3)
    a = holevo_capacity(ch, OptimizerConfig(restarts=4, threads=1))
    b = holevo_capacity(ch, OptimizerConfig(restarts=4, threads=3))
    assert a.restart_values == b.restart_values


def test_moe_examples():
    assert abs(min_output_entropy(identity_channel(2), FAST).value) <= 1e-6
    assert abs(min_output_entropy(completely_depolarizing_channel(2), FAST).value - 1) <= 1e-9
    res = min_output_entropy(dephasing_channel(0.5), FAST)
    assert abs(res.value) <= 1e-4
    assert res.value <= dephasing_moe_grid(0.5) + 1e-4
    # witness: a computational basis state (up to phase)
    assert max(abs(res.state[0]), abs(res.state[1])) > 1 - 1e-3


# -- additivity ---------------------------------------------------------------------------------


def test_verdict_rules():
    tol = 1e-5
    assert AdditivityReport(0.5, 0.5, 1.0 + 2e-5, tol).verdict == "additive_within_tolerance"
    assert AdditivityReport(0.5, 0.5, 1.0 + 4e-5, tol).verdict == "superadditive_signal"
    assert AdditivityReport(0.5, 0.5, 1.0 - 4e-5, tol).verdict == "inconclusive"
    assert AdditivityReport(0.5, 0.5, 1.0, tol, converged=False).verdict == "inconclusive"
    assert not AdditivityReport(0.5, 0.5, 1.0 - 3e-5, tol).floor_ok


def test_additivity_identity_pair():
    rep = additivity_experiment(identity_channel(2), identity_channel(2), FAST)
    assert abs(rep.chi_joint - 2) <= 1e-3 and abs(rep.defect) <= 1e-3


def test_additivity_with_completely_depolarizing():
    a = random_channel(2, 2, 12)
    rep = additivity_experiment(a, completely_depolarizing_channel(2), FAST)
    assert rep.chi_2 <= 1e-6
    assert abs(rep.defect) <= 3 * rep.optimizer_tolerance


def test_additivity_guard():
    with pytest.raises(ValidationError):
        additivity_experiment(identity_channel(4), identity_channel(8), FAST)


def test_reports_csv():
    reps = [AdditivityReport(0.1, 0.2, 0.3 + 1e-17, 1e-5, channel_ids=("a", "b"))] * 3
    rows = list(csv.DictReader(io.StringIO(reports_to_csv(reps))))
    assert len(rows) == 3
    assert float(rows[0]["chi_joint"]) == 0.3 + 1e-17
    assert rows[0]["verdict"] == "additive_within_tolerance"
