"""Empirical moment operators and the truncated spectral estimator of rho.

The estimator keeps the ``k`` leading empirical eigenpairs of the sample
covariance and returns the coefficient matrix of ``P D_n C_n^{-1} P`` where
``P`` is the Ht projection onto those eigenvectors.  Inversion only ever
touches the retained block.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .exceptions import ContractError, TruncationError
from .gelfand import Weights, inner, to_symmetric
from .process import Trajectory

RANK_TOL = 1e-12
TIE_TOL = 1e-14
SYMMETRY_TOL = 1e-10


@dataclass(frozen=True)
class EmpiricalMoments:
    """Sample covariance ``C_n`` and lag-one cross-covariance ``D_n``."""

    C: np.ndarray
    D: np.ndarray
    n: int
    weights: Weights


def empirical_moments(traj: Trajectory, w: Weights) -> EmpiricalMoments:
    """``C_n = (1/n) sum X_i X_i^T T`` and ``D_n = (1/(n-1)) sum X_{i+1} X_i^T T``."""
    X = traj.samples if isinstance(traj, Trajectory) else np.asarray(traj, dtype=float)
    n = X.shape[0]
    if n < 2:
        raise ContractError(f"need at least 2 observations, got {n}")
    if X.shape[1] != w.M:
        raise ContractError(f"trajectory has {X.shape[1]} coordinates, weights have M={w.M}")
    C = (X.T @ X / n) * w.t[None, :]
    D = (X[1:].T @ X[:-1] / (n - 1)) * w.t[None, :]
    return EmpiricalMoments(C, D, n, w)


@dataclass(frozen=True)
class Eigensystem:
    """Descending eigenvalues and Ht-orthonormal eigenvectors (columns).

    ``aligned`` optionally holds the sign-aligned true eigenvectors
    ``phi'_j = sgn<phi_{n,j}, phi_j> phi_j`` paired with each column.
    """

    values: np.ndarray
    vectors: np.ndarray
    weights: Weights
    aligned: np.ndarray | None = field(default=None)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.values > 0))

    @property
    def M(self) -> int:
        return self.values.size


def spectral_decomposition(m, w: Weights) -> Eigensystem:
    """Eigen-decomposition of an Ht self-adjoint operator.

    Solves the symmetric problem for ``T^{1/2} A T^{-1/2}`` and maps the
    eigenvectors back with ``T^{-1/2}``.  Eigenvalues below ``1e-12`` times the
    largest one are set to zero.  Each eigenvector is signed so that its
    largest-magnitude coefficient is positive.
    """
    A = m.C if isinstance(m, EmpiricalMoments) else np.asarray(m, dtype=float)
    S = to_symmetric(A, w)
    scale = max(1.0, float(np.max(np.abs(S))))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > SYMMETRY_TOL * scale:
        raise ContractError(f"operator is not Ht self-adjoint (asymmetry {asym:.3g})")
    lam, U = np.linalg.eigh(0.5 * (S + S.T))
    order = np.argsort(-lam, kind="stable")
    lam, U = lam[order], U[:, order]
    top = lam[0] if lam[0] > 0 else 0.0
    lam = np.where(lam > RANK_TOL * top, lam, 0.0)
    pos = lam[lam > 0]
    if pos.size > 1 and np.any(-np.diff(pos) <= TIE_TOL * top):
        warnings.warn(
            "numerically tied empirical eigenvalues; eigenspaces are not one-dimensional",
            RuntimeWarning,
            stacklevel=2,
        )
    V = U / w.sqrt_t[:, None]
    idx = np.argmax(np.abs(V), axis=0)
    signs = np.where(V[idx, np.arange(V.shape[1])] < 0, -1.0, 1.0)
    return Eigensystem(lam, V * signs[None, :], w)


def sign_align(emp, truth, w: Weights) -> np.ndarray:
    """Return ``truth`` with the sign of ``<emp, truth>_Ht`` (zero counts as +)."""
    truth = np.asarray(truth, dtype=float)
    return truth if inner(emp, truth, w) >= 0 else -truth


def align(eigs: Eigensystem, truth_vectors) -> Eigensystem:
    """Attach sign-aligned true eigenvectors, column by column."""
    T = np.asarray(truth_vectors, dtype=float)
    if T.shape != eigs.vectors.shape:
        raise ContractError("true eigenvectors do not match the eigensystem shape")
    w = eigs.weights
    cols = [sign_align(eigs.vectors[:, j], T[:, j], w) for j in range(T.shape[1])]
    return replace(eigs, aligned=np.column_stack(cols))


@dataclass(frozen=True)
class TruncationRule:
    """How many eigenpairs to keep for a sample of size n.

    ``kind="log"``: ``max(1, floor(c1 ln n + c0))``;
    ``kind="power"``: ``max(1, floor(n**theta))``.
    """

    kind: str = "log"
    c1: float = 0.5
    c0: float = 0.0
    theta: float = 0.25

    def __post_init__(self):
        if self.kind not in ("log", "power"):
            raise ContractError(f"unknown truncation rule {self.kind!r}")
        if self.kind == "power" and not 0 < self.theta < 1:
            raise ContractError(f"power rule needs 0 < theta < 1, got {self.theta}")
        if self.kind == "log" and not self.c1 > 0:
            raise ContractError(f"log rule needs c1 > 0, got {self.c1}")

    def requested(self, n: int) -> int:
        if self.kind == "log":
            return max(1, math.floor(self.c1 * math.log(n) + self.c0))
        return max(1, math.floor(n**self.theta))

    def describe(self) -> str:
        if self.kind == "log":
            return f"log(c1={self.c1:g},c0={self.c0:g})"
        return f"power(theta={self.theta:g})"


def select_truncation(eigs: Eigensystem, n: int, rule: TruncationRule = TruncationRule()) -> int:
    """Truncation level from ``rule``, clipped to the numerical rank."""
    if n < 2:
        raise ContractError(f"need n >= 2, got {n}")
    rank = eigs.rank
    if rank == 0:
        raise TruncationError("all empirical eigenvalues vanish; no admissible truncation")
    return min(rule.requested(n), rank)


@dataclass(frozen=True)
class RhoEstimate:
    """Coefficient matrix of the truncated estimator and its provenance."""

    matrix: np.ndarray
    k: int
    n: int | None = None
    seed: int | None = None
    rule: str | None = None
    eigensystem: Eigensystem | None = None


def truncated_estimator(D, eigs: Eigensystem, k: int) -> np.ndarray:
    """Coefficient matrix of ``P_k D C^{-1} P_k`` from the leading k eigenpairs."""
    if not 1 <= k <= eigs.M:
        raise ContractError(f"truncation level {k} outside 1..{eigs.M}")
    if k > eigs.rank:
        raise TruncationError(
            f"k={k} exceeds the numerical rank {eigs.rank}; C_(n,k) is not invertible"
        )
    t = eigs.weights.t
    V = eigs.vectors[:, :k]
    dual = V.T * t[None, :]  # rows x -> <x, phi_j>
    block = dual @ np.asarray(D, dtype=float) @ V  # <D phi_j, phi_p>, p rows
    return V @ (block / eigs.values[:k][None, :]) @ dual


def estimate_rho_from_moments(C, D, w: Weights, k: int) -> RhoEstimate:
    """Apply the estimator to given covariance operators (empirical or exact)."""
    eigs = spectral_decomposition(C, w)
    return RhoEstimate(truncated_estimator(D, eigs, k), k, eigensystem=eigs)


def estimate_rho(
    traj: Trajectory, w: Weights, rule: TruncationRule = TruncationRule(), k: int | None = None
) -> RhoEstimate:
    """Estimate rho from a trajectory.

    ``k`` overrides the rule; it is still refused beyond the numerical rank.
    """
    mom = empirical_moments(traj, w)
    eigs = spectral_decomposition(mom, w)
    if k is None:
        k = select_truncation(eigs, mom.n, rule)
    mat = truncated_estimator(mom.D, eigs, k)
    seed = traj.seed if isinstance(traj, Trajectory) else None
    return RhoEstimate(mat, k, mom.n, seed, rule.describe(), eigs)


def predict(est: RhoEstimate, x) -> np.ndarray:
    """One-step plug-in forecast ``rho_tilde(x)``."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != est.matrix.shape[1]:
        raise ContractError(f"element has length {x.shape[-1]}, estimator has M={est.matrix.shape[1]}")
    return x @ est.matrix.T


def projector(eigs: Eigensystem, k: int, variant: str = "empirical") -> np.ndarray:
    """Coefficient matrix of the Ht projection onto the first k vectors."""
    if not 0 <= k <= eigs.M:
        raise ContractError(f"projection level {k} outside 0..{eigs.M}")
    if variant == "empirical":
        V = eigs.vectors
    elif variant == "aligned":
        if eigs.aligned is None:
            raise ContractError("aligned projection requested but no alignment data present")
        V = eigs.aligned
    else:
        raise ContractError(f"unknown projection variant {variant!r}")
    V = V[:, :k]
    return V @ V.T * eigs.weights.t[None, :]


def project(x, eigs: Eigensystem, k: int, variant: str = "empirical") -> np.ndarray:
    """Ht-orthogonal projection of ``x`` onto the first k (aligned) eigenvectors."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != eigs.M:
        raise ContractError(f"element has length {x.shape[-1]}, eigensystem has M={eigs.M}")
    return x @ projector(eigs, k, variant).T


def symmetric_part_check(A, w: Weights) -> float:
    """Largest asymmetry of ``T^{1/2} A T^{-1/2}``; zero for Ht self-adjoint A."""
    S = to_symmetric(A, w)
    return float(np.max(np.abs(S - S.T)))

