
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arblab.estimator import (
    Eigensystem,
    TruncationRule,
    empirical_moments,
    estimate_rho,
    estimate_rho_from_moments,
    predict,
    project,
    projector,
    select_truncation,
    sign_align,
    spectral_decomposition,
    truncated_estimator,
)
from arblab.exceptions import ContractError, TruncationError
from arblab.gelfand import Weights, canonical_frame, norm
from arblab.process import build_model, reference_model, simulate, theoretical_moments


def test_rank_one_moments():
    w = Weights.uniform(3)
    v = np.array([1.0, -2.0, 0.5])
    mom = empirical_moments(np.tile(v, (5, 1)), w)
    np.testing.assert_allclose(mom.C, np.outer(v, v) * w.t)
    eigs = spectral_decomposition(mom, w)
    assert eigs.values[0] == pytest.approx(norm(v, w, "Htilde") ** 2)
    assert eigs.values[1] == 0.0 and eigs.rank == 1


def test_two_row_moments():
    w = Weights.uniform(2)
    mom = empirical_moments(np.array([[1.0, 0.0], [0.0, 1.0]]), w)
    np.testing.assert_allclose(mom.C, np.diag([0.25, 0.25]))
    np.testing.assert_allclose(mom.D, [[0.0, 0.0], [0.5, 0.0]])


def test_zero_trajectory():
    mom = empirical_moments(np.zeros((4, 3)), Weights.uniform(3))
    assert np.all(mom.C == 0) and np.all(mom.D == 0)


def test_diagonal_eigenproblem():
    w = Weights(np.array([0.3, 0.7]))
    eigs = spectral_decomposition(np.diag([0.4, 0.1]), w)
    np.testing.assert_allclose(eigs.values, [0.4, 0.1])
    np.testing.assert_allclose(eigs.vectors, canonical_frame(w), atol=1e-15)


def test_not_selfadjoint():
    with pytest.raises(ContractError):
        spectral_decomposition(np.array([[1.0, 0.5], [0.0, 1.0]]), Weights.uniform(2))


def test_tie_warning():
    with pytest.warns(RuntimeWarning):
        spectral_decomposition(np.eye(3), Weights.uniform(3))


def test_sign_alignment():
    w = Weights.uniform(2)
    truth = np.array([1.0, 0.0])
    np.testing.assert_array_equal(sign_align(np.array([0.3, 1.0]), truth, w), truth)
    np.testing.assert_array_equal(sign_align(np.array([-0.3, 1.0]), truth, w), -truth)
    # orthogonal: zero inner product keeps the positive sign
    np.testing.assert_array_equal(sign_align(np.array([0.0, 1.0]), truth, w), truth)


def test_log_rule_frozen():
    # 0.5 * ln 4096 = 4.1588...
    assert TruncationRule("log", 0.5, 0.0).requested(4096) == 4
    assert TruncationRule().requested(2) == 1


def test_power_rule():
    assert TruncationRule("power", theta=0.25).requested(4096) == 8


def test_rank_clip():
    eigs = Eigensystem(np.array([0.5, 0.25, 0.0]), np.eye(3), Weights.uniform(3))
    assert select_truncation(eigs, 10**9, TruncationRule("power", theta=0.9)) == 2


def test_rank_clip_from_decomposition():
    w = Weights.uniform(3)
    eigs = spectral_decomposition(np.diag([0.5, 0.25, 1e-17]), w)
    assert eigs.rank == 2
    assert select_truncation(eigs, 10**6, TruncationRule(c1=5)) == 2
    with pytest.raises(TruncationError):
        truncated_estimator(np.zeros((3, 3)), eigs, 3)


def test_zero_rank():
    eigs = spectral_decomposition(np.zeros((3, 3)), Weights.uniform(3))
    with pytest.raises(TruncationError):
        select_truncation(eigs, 100)


@pytest.mark.parametrize("bad", [dict(kind="cubic"), dict(kind="power", theta=1.0), dict(c1=0.0)])
def test_bad_rule(bad):
    with pytest.raises(ContractError):
        TruncationRule(**bad)


def test_exact_moment_identifiability():
    m = reference_model()
    C, D = theoretical_moments(m)
    est = estimate_rho_from_moments(C, D, m.weights, m.M)
    np.testing.assert_allclose(est.matrix, 0.5 * np.eye(8), atol=1e-10)


def test_rank_one_truncation():
    m = reference_model()
    C, D = theoretical_moments(m)
    est = estimate_rho_from_moments(C, D, m.weights, 1)
    phi = m.spectral.eigenvectors[:, 0]
    expected = 0.5 * np.outer(phi, phi) * m.weights.t
    np.testing.assert_allclose(est.matrix, expected, atol=1e-12)


def test_consistency_direction():
    m = reference_model()
    w = m.weights

    def median_err(n):
        errs = []
        for r in range(30):
            est = estimate_rho(simulate(m, n, seed=r), w)
            errs.append(np.abs(est.matrix - m.rho_operator()).sum(axis=1).max())
        return np.median(errs)

    assert median_err(4096) < median_err(256)


def test_predict_examples():
    est = estimate_rho_from_moments(*theoretical_moments(reference_model()), reference_model().weights, 8)
    e1 = np.eye(8)[0]
    np.testing.assert_allclose(predict(est, e1), 0.5 * e1, atol=1e-12)
    np.testing.assert_array_equal(predict(est, np.zeros(8)), 0.0)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_predict_linear(seed, a, b):
    rng = np.random.default_rng(seed)
    m = reference_model()
    est = estimate_rho(simulate(m, 64, seed=seed % 97), m.weights)
    x, y = rng.standard_normal((2, 8))
    lhs = predict(est, a * x + b * y)
    rhs = a * predict(est, x) + b * predict(est, y)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


def test_projection_edges():
    m = reference_model()
    eigs = spectral_decomposition(theoretical_moments(m)[0], m.weights)
    x = np.random.default_rng(0).standard_normal(8)
    np.testing.assert_allclose(project(x, eigs, 8), x, atol=1e-12)
    np.testing.assert_array_equal(project(x, eigs, 0), 0.0)
    with pytest.raises(ContractError):
        projector(eigs, 3, "aligned")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.integers(0, 6))
def test_projection_idempotent(seed, k):
    rng = np.random.default_rng(seed)
    w = Weights.from_raw(rng.uniform(0.05, 1, 6))
    X = rng.standard_normal((20, 6))
    eigs = spectral_decomposition(empirical_moments(X, w), w)
    x = rng.standard_normal(6)
    p = project(x, eigs, k)
    np.testing.assert_allclose(project(p, eigs, k), p, atol=1e-12 * max(1, np.abs(x).max()))


def test_estimate_from_two_samples():
    m = reference_model()
    est = estimate_rho(simulate(m, 2, seed=0), m.weights)
    assert est.k == 1 and est.n == 2


def test_k_override_beyond_rank():
    m = build_model(np.array([0.5, 0.25, 0.125]), 0.5)
    with pytest.raises(TruncationError):
        estimate_rho(np.array([[1.0, 0.0, 0.0], [0.5, 0.0, 0.0]]), m.weights, k=2)
