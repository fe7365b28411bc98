"""Kuelbs coordinates and the chain of embedded spaces built on them.

A point of the Banach space B is stored through its coordinate functionals,
``x[m] = F_{m+1}(x)``, as a plain 1-D float array of length M (an *Element*).
Linear operators are M x M arrays acting on those coefficient vectors (a
*LinOp*).  Given a positive weight sequence ``t`` summing to one, the five
norms of the chain

    ||x||_Ht <= ||x||_B <= ||x||_H <= ||x||_B* <= ||x||_Ht*

are all simple functions of the coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractError

SPACES = ("B", "Htilde", "H", "Bstar", "Htilde_star")

_SPACE_ALIASES = {
    "B": "B",
    "Htilde": "Htilde",
    "H~": "Htilde",
    "H̃": "Htilde",
    "H": "H",
    "Bstar": "Bstar",
    "B*": "Bstar",
    "Htilde_star": "Htilde_star",
    "H~*": "Htilde_star",
    "H̃*": "Htilde_star",
}

NORMALIZATION_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-10


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Weights:
    """Positive weight sequence defining the Ht inner product.

    Parameters
    ----------
    t : array_like
        Strictly positive weights.  They must already sum to one; use
        :meth:`from_raw` to normalize an arbitrary positive sequence.
    """

    t: np.ndarray

    def __post_init__(self):
        t = _readonly(self.t)
        if t.ndim != 1 or t.size < 2:
            raise ContractError("weights need a 1-D vector with at least 2 entries")
        if not np.all(np.isfinite(t)) or np.any(t <= 0):
            raise ContractError("weights must be finite and strictly positive")
        if abs(t.sum() - 1.0) > NORMALIZATION_TOL:
            raise ContractError(f"weights sum to {t.sum():.17g}, expected 1")
        object.__setattr__(self, "t", t)

    @classmethod
    def from_raw(cls, raw) -> "Weights":
        """Normalize a positive sequence to unit mass."""
        raw = np.asarray(raw, dtype=float)
        if raw.ndim != 1 or np.any(raw <= 0) or not np.all(np.isfinite(raw)):
            raise ContractError("raw weights must be finite and strictly positive")
        t = raw / raw.sum()
        # one correction step keeps |sum - 1| at the rounding floor
        t = t / t.sum()
        return cls(t)

    @classmethod
    def uniform(cls, M: int) -> "Weights":
        return cls.from_raw(np.ones(M))

    @property
    def M(self) -> int:
        return self.t.size

    @property
    def sqrt_t(self) -> np.ndarray:
        return np.sqrt(self.t)


def _check(x, w: Weights) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != w.M:
        raise ContractError(f"element has length {x.shape[-1]}, weights have M={w.M}")
    return x


def _check_op(A, w: Weights) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (w.M, w.M):
        raise ContractError(f"operator has shape {A.shape}, expected ({w.M}, {w.M})")
    return A


def inner(x, y, w: Weights) -> float:
    """Ht inner product ``sum_m t_m x_m y_m``."""
    x, y = _check(x, w), _check(y, w)
    return float(np.sum(w.t * x * y))


def dual_inner(x, y, w: Weights) -> float:
    """Ht* inner product ``sum_m x_m y_m / t_m``."""
    x, y = _check(x, w), _check(y, w)
    return float(np.sum(x * y / w.t))


def norm(x, w: Weights, space: str = "B") -> float:
    """Norm of an element in one of the five spaces of the chain.

    Parameters
    ----------
    x : array_like, shape (M,)
        Coordinates ``F_m(x)``.
    w : Weights
    space : {"B", "Htilde", "H", "Bstar", "Htilde_star"}
        ``"B"`` is the sup norm, ``"Htilde"`` the weighted l2 norm,
        ``"H"`` plain l2, ``"Bstar"`` l1 and ``"Htilde_star"`` the
        inverse-weighted l2 norm.
    """
    x = _check(x, w)
    try:
        space = _SPACE_ALIASES[space]
    except KeyError:
        raise ContractError(f"unknown space {space!r}; expected one of {SPACES}") from None
    scale = float(np.max(np.abs(x)))
    if space == "B":
        return scale
    if space == "Bstar":
        return float(np.sum(np.abs(x)))
    if scale == 0.0 or not np.isfinite(scale):
        return scale
    # rescale before squaring so tiny or huge coordinates neither underflow nor overflow
    y = x / scale
    if space == "Htilde":
        return scale * float(np.sqrt(np.sum(w.t * y * y)))
    if space == "H":
        return scale * float(np.sqrt(np.sum(y * y)))
    return scale * float(np.sqrt(np.sum(y * y / w.t)))


def riesz_map(f, w: Weights) -> np.ndarray:
    """Riesz representative of ``f`` in Ht*, coordinates ``t_m f_m``.

    The map is an isometry: ``dual_inner(riesz_map(f), riesz_map(g)) ==
    inner(f, g)``.
    """
    return w.t * _check(f, w)


def gram(vectors, w: Weights) -> np.ndarray:
    """Gram matrix ``V^T T V`` of the columns of ``vectors``."""
    V = np.asarray(vectors, dtype=float)
    if V.shape[0] != w.M:
        raise ContractError(f"vectors have {V.shape[0]} rows, weights have M={w.M}")
    return V.T @ (w.t[:, None] * V)


def to_symmetric(A, w: Weights) -> np.ndarray:
    """Similarity transform ``T^{1/2} A T^{-1/2}``.

    An operator is self-adjoint in Ht exactly when the result is a
    symmetric matrix; its singular values are the Ht singular values.
    """
    A = _check_op(A, w)
    s = w.sqrt_t
    return s[:, None] * A / s[None, :]


def from_symmetric(S, w: Weights) -> np.ndarray:
    """Inverse of :func:`to_symmetric`."""
    S = _check_op(S, w)
    s = w.sqrt_t
    return S * s[None, :] / s[:, None]


def outer(u, v, w: Weights) -> np.ndarray:
    """Coefficient matrix of the rank-one operator ``x -> <x, v>_Ht u``."""
    u, v = _check(u, w), _check(v, w)
    return np.outer(u, w.t * v)


def canonical_frame(w: Weights) -> np.ndarray:
    """Ht-orthonormal frame ``e_m / sqrt(t_m)`` (columns)."""
    return np.diag(1.0 / w.sqrt_t)


def random_frame(w: Weights, rng: np.random.Generator) -> np.ndarray:
    """Random Ht-orthonormal frame ``T^{-1/2} Q`` with Haar-distributed Q."""
    G = rng.standard_normal((w.M, w.M))
    Q, R = np.linalg.qr(G)
    Q = Q * np.sign(np.diag(R))[None, :]
    return Q / w.sqrt_t[:, None]


@dataclass(frozen=True)
class SpectralModel:
    """Spectral form ``C = sum_j C_j phi_j (x) phi_j`` of a covariance operator.

    ``eigenvalues`` must be strictly decreasing and positive, and the columns
    of ``eigenvectors`` must be orthonormal in Ht.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    weights: Weights

    def __post_init__(self):
        lam = _readonly(self.eigenvalues)
        Phi = _readonly(self.eigenvectors)
        w = self.weights
        if lam.shape != (w.M,) or Phi.shape != (w.M, w.M):
            raise ContractError("eigen data do not match the weight dimension")
        if np.any(lam <= 0) or np.any(np.diff(lam) >= 0):
            raise ContractError("eigenvalues must be positive and strictly decreasing")
        err = np.max(np.abs(gram(Phi, w) - np.eye(w.M)))
        if err > ORTHONORMALITY_TOL:
            raise ContractError(f"eigenvectors are not Ht-orthonormal (gram error {err:.3g})")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "eigenvectors", Phi)

    @property
    def M(self) -> int:
        return self.weights.M

    def operator(self) -> np.ndarray:
        """Coefficient matrix of C."""
        Phi = self.eigenvectors
        return (Phi * self.eigenvalues) @ Phi.T * self.weights.t[None, :]

    def coordinates(self, f) -> np.ndarray:
        """Ht projections ``<f, phi_j>``."""
        f = _check(f, self.weights)
        return self.eigenvectors.T @ (self.weights.t * f)


def rkhs_norm(f, model: SpectralModel, tol: float = 1e-10) -> float:
    """RKHS norm ``sqrt(<C^{-1} f, f>_Ht)``.

    Returns ``inf`` when ``f`` has a component outside the span of the
    eigenvectors (a null direction of C) larger than ``tol`` in Ht norm.
    """
    w = model.weights
    f = _check(f, w)
    p = model.coordinates(f)
    residual = f - model.eigenvectors @ p
    if norm(residual, w, "Htilde") > tol * max(1.0, norm(f, w, "Htilde")):
        return float("inf")
    return float(np.sqrt(np.sum(p * p / model.eigenvalues)))
