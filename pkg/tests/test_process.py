import numpy as np
import pytest

from arblab.estimator import spectral_decomposition
from arblab.exceptions import EigenvalueTieError, StationarityError, ContractError
from arblab.gelfand import Weights, inner
from arblab.process import (
    Trajectory,
    build_model,
    derive_seed,
    frame_scores,
    geometric_profile,
    reference_model,
    simulate,
    theoretical_moments,
)


def test_reference_innovation_variance():
    m = reference_model()
    np.testing.assert_allclose(m.innovation_variances, 0.75 * 2.0 ** -np.arange(1, 9), rtol=1e-14)
    assert m.default_burn_in() == 20


def test_white_noise_variance():
    C = geometric_profile(4)
    m = build_model(C, 0.0)
    np.testing.assert_allclose(m.innovation_variances, C, rtol=1e-14)


def test_tied_eigenvalues_rejected():
    with pytest.raises(EigenvalueTieError):
        build_model(np.array([0.5, 0.5, 0.25]), 0.5)


@pytest.mark.parametrize("rho, rho_max", [(0.99, 0.95), (0.5, 1.0), (-0.97, 0.95)])
def test_stationarity(rho, rho_max):
    with pytest.raises(StationarityError):
        build_model(geometric_profile(4), rho, rho_max=rho_max)


def test_white_noise_lag_one():
    m = build_model(geometric_profile(4), 0.0)
    n = 100_000
    s = frame_scores(m, simulate(m, n, seed=5))
    lag = np.mean(s[1:] * s[:-1], axis=0) / np.sqrt(m.spectral.eigenvalues) ** 2
    assert np.all(np.abs(lag) < 3 / np.sqrt(n))


def test_determinism():
    m = reference_model()
    a = simulate(m, 200, seed=11).samples
    b = simulate(m, 200, seed=11).samples
    assert a.tobytes() == b.tobytes()
    assert not np.array_equal(a, simulate(m, 200, seed=12).samples)


def test_stationary_variance():
    m = reference_model()
    s = frame_scores(m, simulate(m, 100_000, burn_in=1000, seed=2))
    C = m.spectral.eigenvalues
    np.testing.assert_allclose(s[:, :4].var(axis=0), C[:4], rtol=0.05)


def test_cross_covariance_entry():
    w = Weights.uniform(3)
    m = build_model(np.array([0.5, 0.25, 0.125]), 0.5, w)
    _, D = theoretical_moments(m)
    phi = m.spectral.eigenvectors[:, 0]
    assert inner(D @ phi, phi, w) == pytest.approx(0.25, abs=1e-14)


def test_zero_rho_zero_cross_covariance():
    _, D = theoretical_moments(build_model(geometric_profile(4), 0.0))
    assert np.all(D == 0)


def test_moment_round_trip():
    m = reference_model()
    C, _ = theoretical_moments(m)
    eigs = spectral_decomposition(C, m.weights)
    np.testing.assert_allclose(eigs.values, m.spectral.eigenvalues, atol=1e-10)
    for j in range(m.M):
        v, phi = eigs.vectors[:, j], m.spectral.eigenvectors[:, j]
        assert min(np.abs(v - phi).max(), np.abs(v + phi).max()) < 1e-10


def test_banded_model_is_stationary():
    rng = np.random.default_rng(0)
    w = Weights.from_raw(rng.uniform(0.2, 1, 5))
    m = build_model(geometric_profile(5), 0.4, w, rho_band=0.1)
    assert not m.is_diagonal
    assert m.rho_max < 1
    C, D = theoretical_moments(m)
    X = simulate(m, 50_000, seed=1).samples
    C_hat = (X.T @ X / len(X)) * w.t
    np.testing.assert_allclose(C_hat, C, atol=0.05 * np.abs(C).max())


def test_trajectory_contract():
    with pytest.raises(ContractError):
        Trajectory(np.ones((1, 3)))
    with pytest.raises(ContractError):
        Trajectory(np.array([[1.0, np.nan], [0.0, 0.0]]))


def test_derive_seed_stable():
    assert derive_seed(0, 1) == derive_seed(0, 1)
    assert derive_seed(0, 1) != derive_seed(0, 2)
    assert derive_seed(0, 1) != derive_seed(1, 1)
