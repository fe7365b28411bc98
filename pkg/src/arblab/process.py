"""ARB(1) models and simulation of the state equation ``X_n = rho(X_{n-1}) + eps_n``.

Models are built in the eigen-coordinates of an Ht-orthonormal frame Phi.
The autocorrelation operator is diagonal there (optionally with a
super-diagonal band) and the innovations are independent symmetric uniform
variables per mode, which keeps every trajectory almost surely bounded in B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg, signal

from .exceptions import ContractError, EigenvalueTieError, StationarityError
from .gelfand import SpectralModel, Weights, canonical_frame, gram

TIE_TOL = 1e-14


def geometric_profile(M: int, ratio: float = 0.5, scale: float = 1.0) -> np.ndarray:
    """Eigenvalues ``scale * ratio**j`` for ``j = 1..M``."""
    if not 0 < ratio < 1:
        raise ContractError(f"geometric ratio must lie in (0, 1), got {ratio}")
    return scale * ratio ** np.arange(1, M + 1, dtype=float)


def power_profile(M: int, exponent: float = 2.0, scale: float = 1.0) -> np.ndarray:
    """Eigenvalues ``scale * j**-exponent`` for ``j = 1..M``."""
    if not exponent > 0:
        raise ContractError(f"power exponent must be positive, got {exponent}")
    return scale * np.arange(1, M + 1, dtype=float) ** -exponent


def derive_seed(master_seed: int, *keys: int) -> int:
    """Child seed for ``(master_seed, *keys)``.

    The splitting rule is ``SeedSequence([master_seed, *keys])`` reduced to
    its first 64-bit state word, so replicate seeds depend only on their
    coordinates and never on execution order.
    """
    ss = np.random.SeedSequence([int(master_seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


@dataclass(frozen=True)
class ARBModel:
    """A stationary ARB(1) model with a known spectral ground truth.

    Attributes
    ----------
    spectral : SpectralModel
        Eigenvalues and eigenvectors of the stationary covariance C.
    frame : ndarray (M, M)
        Ht-orthonormal frame in which ``rho_frame`` and the innovations are
        expressed.  Equals ``spectral.eigenvectors`` for diagonal models.
    rho_frame : ndarray (M, M)
        Autocorrelation operator in frame coordinates.
    rho_coeffs : ndarray (M,)
        Diagonal of ``rho_frame``.
    half_widths : ndarray (M,)
        Uniform innovation half-widths ``a_j``; ``sigma_j**2 = a_j**2 / 3``.
    j0 : int
        Smallest power with ``||rho**j0||_L(Ht) < 1``.
    """

    spectral: SpectralModel
    frame: np.ndarray
    rho_frame: np.ndarray
    rho_coeffs: np.ndarray
    half_widths: np.ndarray
    j0: int

    @property
    def weights(self) -> Weights:
        return self.spectral.weights

    @property
    def M(self) -> int:
        return self.weights.M

    @property
    def innovation_variances(self) -> np.ndarray:
        return self.half_widths**2 / 3.0

    @property
    def sigma_eps2(self) -> float:
        return float(self.innovation_variances.sum())

    @property
    def is_diagonal(self) -> bool:
        return bool(np.all(self.rho_frame == np.diag(np.diag(self.rho_frame))))

    @property
    def rho_max(self) -> float:
        """Spectral radius of rho (equals ``max |rho_j|`` when diagonal)."""
        return float(np.max(np.abs(np.linalg.eigvals(self.rho_frame))))

    def rho_operator(self) -> np.ndarray:
        """Coefficient matrix of rho acting on Elements."""
        F = self.frame
        return F @ self.rho_frame @ F.T * self.weights.t[None, :]

    def default_burn_in(self) -> int:
        return math.ceil(10.0 / (1.0 - self.rho_max))


def _check_profile(eigenvalues) -> np.ndarray:
    C = np.asarray(eigenvalues, dtype=float)
    if C.ndim != 1 or C.size < 2:
        raise ContractError("eigenvalue profile must be a vector of length >= 2")
    if np.any(C <= 0) or not np.all(np.isfinite(C)):
        raise ContractError("eigenvalues must be finite and strictly positive")
    gaps = -np.diff(C)
    if np.any(gaps <= TIE_TOL * C[0]):
        j = int(np.argmax(gaps <= TIE_TOL * C[0])) + 1
        raise EigenvalueTieError(
            f"eigenvalues {j} and {j + 1} are not strictly decreasing: "
            "each eigenspace must be one-dimensional"
        )
    return C


def build_model(
    eigenvalues,
    rho,
    weights: Weights | None = None,
    frame=None,
    rho_band=None,
    rho_max: float = 0.99,
) -> ARBModel:
    """Construct a stationary model with prescribed stationary spectrum.

    Parameters
    ----------
    eigenvalues : array_like, shape (M,)
        Target eigenvalues ``C_j``, strictly decreasing.
    rho : float or array_like
        Diagonal autocorrelation coefficients ``rho_j`` in the frame.
    weights : Weights, optional
        Defaults to uniform weights.
    frame : ndarray, optional
        Ht-orthonormal frame; defaults to ``e_m / sqrt(t_m)``.
    rho_band : array_like, optional
        Super-diagonal entries ``rho_{j, j+1}``.  With a band, C is the
        solution of the Lyapunov equation and its spectrum is recomputed.
    rho_max : float
        Admissible bound on ``|rho_j|``; must be below one.

    Notes
    -----
    Innovation variances are ``sigma_j**2 = C_j (1 - rho_j**2)`` so that the
    diagonal model has exactly the requested stationary spectrum.
    """
    C = _check_profile(eigenvalues)
    M = C.size
    if not rho_max < 1.0:
        raise StationarityError(
            f"rho_max = {rho_max} violates the stationarity condition ||rho|| < 1"
        )
    rho = np.broadcast_to(np.asarray(rho, dtype=float), (M,)).copy()
    if np.any(np.abs(rho) > rho_max):
        raise StationarityError(
            f"sup |rho_j| = {np.max(np.abs(rho)):.6g} exceeds rho_max = {rho_max}; "
            "stationarity requires a contraction"
        )
    w = weights if weights is not None else Weights.uniform(M)
    if w.M != M:
        raise ContractError(f"weights have M={w.M}, eigenvalue profile has {M}")
    F = canonical_frame(w) if frame is None else np.asarray(frame, dtype=float)
    if F.shape != (M, M) or np.max(np.abs(gram(F, w) - np.eye(M))) > 1e-10:
        raise ContractError("frame must be an Ht-orthonormal M x M matrix")

    sigma2 = C * (1.0 - rho**2)
    half_widths = np.sqrt(3.0 * sigma2)
    R = np.diag(rho)
    if rho_band is not None and np.any(np.asarray(rho_band) != 0):
        band = np.broadcast_to(np.asarray(rho_band, dtype=float), (M - 1,))
        R = R + np.diag(band, 1)
        radius = float(np.max(np.abs(np.linalg.eigvals(R))))
        if radius >= 1.0:
            raise StationarityError(f"banded rho has spectral radius {radius:.6g} >= 1")
        C_frame = linalg.solve_discrete_lyapunov(R, np.diag(sigma2))
        C_frame = 0.5 * (C_frame + C_frame.T)
        lam, U = np.linalg.eigh(C_frame)
        order = np.argsort(lam)[::-1]
        lam, U = lam[order], U[:, order]
        _check_profile(lam)
        spectral = SpectralModel(lam, F @ U, w)
    else:
        spectral = SpectralModel(C, F, w)

    j0, P = 1, R.copy()
    while np.linalg.norm(P, 2) >= 1.0:
        j0 += 1
        P = P @ R
        if j0 > 10_000:
            raise StationarityError("no power of rho is a contraction")
    return ARBModel(spectral, F, R, rho, half_widths, j0)


def reference_model(M: int = 8, rho: float = 0.5) -> ARBModel:
    """Diagonal model with ``C_j = 2**-j``, constant ``rho_j`` and uniform weights."""
    return build_model(geometric_profile(M, 0.5), rho, Weights.uniform(M))


@dataclass(frozen=True)
class Trajectory:
    """Simulated sample ``X_0, ..., X_{n-1}`` in coefficient coordinates."""

    samples: np.ndarray
    seed: int | None = None
    burn_in: int = 0

    def __post_init__(self):
        X = np.asarray(self.samples, dtype=float)
        if X.ndim != 2 or X.shape[0] < 2:
            raise ContractError("a trajectory needs at least 2 rows")
        if not np.all(np.isfinite(X)):
            raise ContractError("trajectory contains non-finite values")
        object.__setattr__(self, "samples", X)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def M(self) -> int:
        return self.samples.shape[1]


def simulate(model: ARBModel, n: int, burn_in: int | None = None, seed: int = 0) -> Trajectory:
    """Iterate the state equation from zero and keep the last ``n`` states.

    The output depends only on ``(model, n, burn_in, seed)``.
    """
    if n < 2:
        raise ContractError(f"need n >= 2, got {n}")
    if burn_in is None:
        burn_in = model.default_burn_in()
    if burn_in < 0:
        raise ContractError(f"burn_in must be non-negative, got {burn_in}")
    rng = np.random.default_rng(seed)
    total = n + burn_in
    a = model.half_widths
    u = rng.uniform(-1.0, 1.0, size=(total, model.M)) * a[None, :]
    if model.is_diagonal:
        scores = np.empty_like(u)
        for j, r in enumerate(model.rho_coeffs):
            scores[:, j] = signal.lfilter([1.0], [1.0, -r], u[:, j])
    else:
        R = model.rho_frame
        scores = np.empty_like(u)
        prev = np.zeros(model.M)
        for i in range(total):
            prev = R @ prev + u[i]
            scores[i] = prev
    X = scores[burn_in:] @ model.frame.T
    return Trajectory(X, seed, burn_in)


def frame_scores(model: ARBModel, traj: Trajectory) -> np.ndarray:
    """Ht coordinates ``<X_i, f_j>`` of each sample against the model frame."""
    return traj.samples @ (model.weights.t[:, None] * model.frame)


def theoretical_moments(model: ARBModel) -> tuple[np.ndarray, np.ndarray]:
    """Coefficient matrices of the covariance C and cross-covariance D = rho C."""
    sp = model.spectral
    C = sp.operator()
    D = model.rho_operator() @ C
    return C, D
