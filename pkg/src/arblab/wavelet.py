"""Periodized wavelets on [0, 1), Besov norms and the Kuelbs weight sequence.

Coefficients follow the orthonormal convention of the discrete transform on
a dyadic grid of ``2**(J_max + 1)`` samples: ``2**J`` scaling coefficients at
the coarsest level ``J`` and ``2**j`` detail coefficients for every level
``J <= j <= J_max``.  The flat ordering used everywhere else in the package
is ``[alpha_J, beta_J, beta_{J+1}, ..., beta_{J_max}]``, i.e. coarse to fine
and left to right within a level.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import pywt
from scipy import sparse

from .exceptions import ContractError, UnsupportedOperation
from .gelfand import SpectralModel, Weights, canonical_frame

FAMILIES = {
    "haar": "haar",
    "db1": "haar",
    "daubechies4": "db2",
    "db2": "db2",
    "d4": "db2",
    "daubechies8": "db4",
    "db4": "db4",
    "d8": "db4",
}

TIE_EPS = 1e-6


@dataclass(frozen=True)
class WaveletBasis:
    """Periodized orthonormal wavelet system truncated at level ``J_max``.

    Parameters
    ----------
    family : str
        ``"haar"``, ``"daubechies4"`` (4-tap, pywt ``db2``) or
        ``"daubechies8"`` (8-tap, pywt ``db4``).
    J : int
        Coarsest level; ``2**(J + 1)`` must cover the filter length.
    J_max : int
        Finest detail level, ``J_max >= J``.
    """

    family: str = "haar"
    J: int = 1
    J_max: int = 2

    def __post_init__(self):
        try:
            name = FAMILIES[self.family.lower()]
        except KeyError:
            raise ContractError(f"unknown wavelet family {self.family!r}") from None
        object.__setattr__(self, "family", name)
        if self.J < 0 or self.J_max < self.J:
            raise ContractError(f"need 0 <= J <= J_max, got J={self.J}, J_max={self.J_max}")
        if 2 ** (self.J + 1) < self.filter_length:
            raise ContractError(
                f"2**(J+1) = {2 ** (self.J + 1)} is shorter than the "
                f"{self.filter_length}-tap {self.family} filter"
            )

    @property
    def wavelet(self) -> pywt.Wavelet:
        return pywt.Wavelet(self.family)

    @property
    def filter_length(self) -> int:
        return self.wavelet.dec_len

    @property
    def grid_size(self) -> int:
        return 2 ** (self.J_max + 1)

    @property
    def levels(self) -> int:
        """Number of analysis steps from the grid down to level J."""
        return self.J_max + 1 - self.J

    def grid(self) -> np.ndarray:
        """Left endpoints ``i / grid_size`` of the dyadic cells."""
        return np.arange(self.grid_size) / self.grid_size

    def index_levels(self) -> np.ndarray:
        """Resolution level of every flat coefficient index."""
        lv = [np.full(2**self.J, self.J)]
        lv += [np.full(2**j, j) for j in range(self.J, self.J_max + 1)]
        return np.concatenate(lv)

    def labels(self) -> list[str]:
        """Column names ``phi_J_k`` / ``psi_j_k`` in flat order."""
        out = [f"phi_{self.J}_{k}" for k in range(2**self.J)]
        for j in range(self.J, self.J_max + 1):
            out += [f"psi_{j}_{k}" for k in range(2**j)]
        return out


@dataclass(frozen=True)
class CoeffArray:
    """Scaling coefficients ``alpha`` and per-level details ``beta``."""

    alpha: np.ndarray
    beta: tuple

    def __post_init__(self):
        object.__setattr__(self, "alpha", np.asarray(self.alpha, dtype=float))
        object.__setattr__(self, "beta", tuple(np.asarray(b, dtype=float) for b in self.beta))
        for b in (self.alpha, *self.beta):
            if not np.all(np.isfinite(b)):
                raise ContractError("coefficients must be finite")

    def flat(self) -> np.ndarray:
        return np.concatenate([self.alpha, *self.beta])

    @classmethod
    def from_flat(cls, vec, basis: WaveletBasis) -> "CoeffArray":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (basis.grid_size,):
            raise ContractError(
                f"expected {basis.grid_size} coefficients, got shape {vec.shape}"
            )
        n0 = 2**basis.J
        alpha = vec[:n0]
        beta, pos = [], n0
        for j in range(basis.J, basis.J_max + 1):
            beta.append(vec[pos : pos + 2**j])
            pos += 2**j
        return cls(alpha, tuple(beta))

    def check_layout(self, basis: WaveletBasis) -> None:
        ok = self.alpha.size == 2**basis.J and len(self.beta) == basis.levels
        ok = ok and all(b.size == 2**j for j, b in zip(range(basis.J, basis.J_max + 1), self.beta))
        if not ok:
            raise ContractError("coefficient layout does not match the wavelet basis")


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def dwt(samples, basis: WaveletBasis) -> CoeffArray:
    """Orthonormal periodized analysis of grid samples down to level J."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or not _is_power_of_two(x.size):
        raise ContractError(f"sample length {x.size} is not a power of two")
    if x.size != basis.grid_size:
        raise ContractError(f"expected {basis.grid_size} samples, got {x.size}")
    with warnings.catch_warnings():
        # the basis already guarantees 2**(J+1) >= filter length, which is all
        # periodization needs; pywt's level heuristic is stricter
        warnings.filterwarnings("ignore", "Level value", UserWarning)
        coeffs = pywt.wavedec(x, basis.family, mode="periodization", level=basis.levels)
    return CoeffArray(coeffs[0], tuple(coeffs[1:]))


def idwt(coeffs: CoeffArray, basis: WaveletBasis) -> np.ndarray:
    """Synthesis inverse of :func:`dwt`."""
    coeffs.check_layout(basis)
    return pywt.waverec([coeffs.alpha, *coeffs.beta], basis.family, mode="periodization")


def synthesis_matrix(basis: WaveletBasis) -> np.ndarray:
    """Grid values of every discrete basis vector, one column per flat index."""
    sizes = [2**basis.J] + [2**j for j in range(basis.J, basis.J_max + 1)]
    blocks = np.split(np.eye(basis.grid_size), np.cumsum(sizes)[:-1])
    return pywt.waverec(blocks, basis.family, mode="periodization", axis=0)


def gram_error(basis: WaveletBasis) -> float:
    """``max |<w_m, w_l> - delta_ml|`` over all pairs of discrete basis vectors.

    The synthesis matrix has O(N log N) nonzeros, so the Gram matrix is formed
    as a sparse product.
    """
    S = sparse.csc_matrix(synthesis_matrix(basis))
    G = (S.T @ S - sparse.identity(S.shape[1], format="csc")).tocoo()
    return float(np.max(np.abs(G.data))) if G.nnz else 0.0


class BesovWeights(NamedTuple):
    raw: np.ndarray
    weights: Weights
    tail_mass: float


def besov_weights(J: int, J_max: int, beta_exp: float) -> BesovWeights:
    """Kuelbs weights attached to the wavelet coordinates.

    Scaling indices receive ``2**-J`` and a detail index at level ``j``
    receives ``(2**(2b) - 1) / 2**(2b(1-J)) * 2**(-2jb)``.  ``raw`` holds these
    values in flat order, ``weights`` their normalization to unit mass and
    ``tail_mass`` the raw mass of all levels beyond ``J_max``.
    """
    if not beta_exp > 0.5:
        raise ContractError(f"beta_exp must exceed 1/2 for a summable sequence, got {beta_exp}")
    if J < 0 or J_max < J:
        raise ContractError(f"need 0 <= J <= J_max, got J={J}, J_max={J_max}")
    b2 = 2.0 * beta_exp
    const = (2.0**b2 - 1.0) / 2.0 ** (b2 * (1 - J))
    parts = [np.full(2**J, 2.0**-J)]
    parts += [np.full(2**j, const * 2.0 ** (-b2 * j)) for j in range(J, J_max + 1)]
    raw = np.concatenate(parts)
    # sum_{j > J_max} 2**j * const * 2**(-2bj), a geometric series with ratio 2**(1-2b)
    r = 2.0 ** (1.0 - b2)
    tail = const * r ** (J_max + 1) / (1.0 - r)
    return BesovWeights(raw, Weights.from_raw(raw), float(tail))


def besov_norm(coeffs: CoeffArray, space: str = "B_inf_inf_0") -> float:
    """B^0_{inf,inf} (sup) or B^0_{1,1} (sum) norm of wavelet coefficients."""
    a = np.abs(coeffs.flat())
    if space == "B_inf_inf_0":
        return float(a.max()) if a.size else 0.0
    if space == "B_1_1_0":
        return float(a.sum())
    raise ContractError(f"unknown Besov space {space!r}")


def haar_scaling(x, J: int, k: int) -> np.ndarray:
    """Periodized Haar father wavelet ``phi_{J,k}`` on [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = 2.0**J * x - k
    return np.where((y >= 0) & (y < 1), 2.0 ** (J / 2), 0.0)


def haar_wavelet(x, j: int, k: int) -> np.ndarray:
    """Haar mother wavelet ``psi_{j,k}``: +2**(j/2) then -2**(j/2)."""
    x = np.asarray(x, dtype=float)
    y = 2.0**j * x - k
    amp = 2.0 ** (j / 2)
    return np.where((y >= 0) & (y < 0.5), amp, np.where((y >= 0.5) & (y < 1), -amp, 0.0))


def kernel_eval(s, t_pt, basis: WaveletBasis, beta_exp: float) -> float:
    """Covariance kernel of the weight operator, truncated at ``J_max``.

    Uses the raw (unnormalized) weights.  Only the Haar family has a closed
    pointwise form here.
    """
    if basis.family != "haar":
        raise UnsupportedOperation("pointwise kernel evaluation is implemented for Haar only")
    for p in (s, t_pt):
        if not 0.0 <= p < 1.0:
            raise ContractError(f"kernel arguments must lie in [0, 1), got {p}")
    raw = besov_weights(basis.J, basis.J_max, beta_exp).raw
    J = basis.J
    total = 0.0
    m = 0
    for k in range(2**J):
        total += raw[m] * float(haar_scaling(s, J, k) * haar_scaling(t_pt, J, k))
        m += 1
    for j in range(J, basis.J_max + 1):
        for k in range(2**j):
            total += raw[m] * float(haar_wavelet(s, j, k) * haar_wavelet(t_pt, j, k))
            m += 1
    return total


def bessel_eigen_profile(gamma: float, basis: WaveletBasis, c0: float = 1.0) -> np.ndarray:
    """Diagonal surrogate for the spectrum of ``(I - Laplacian)**-gamma``.

    Flat index ``m`` at level ``j`` gets ``c0 * 2**(-2 gamma j) * (1 - m eps)``
    with ``eps = 1e-6``; scaling indices use level ``J``.  The perturbation
    separates ties inside a level while keeping the flat order, so the
    returned (descending) vector is aligned with the flat coefficient order.
    """
    if not gamma > 0:
        raise ContractError(f"gamma must be positive, got {gamma}")
    if not c0 > 0:
        raise ContractError(f"c0 must be positive, got {c0}")
    lv = basis.index_levels()
    m = np.arange(lv.size)
    if lv.size * TIE_EPS >= 1 - 2.0 ** (-2 * gamma):
        raise ContractError("grid too large for the tie-breaking perturbation at this gamma")
    vals = c0 * 2.0 ** (-2.0 * gamma * lv) * (1.0 - m * TIE_EPS)
    return np.sort(vals)[::-1]


def wavelet_spectral_model(
    basis: WaveletBasis, beta_exp: float = 1.0, gamma: float = 2.5, c0: float | None = None
) -> SpectralModel:
    """Covariance model on the wavelet coordinates with normalized Besov weights.

    Eigenvectors are the canonical frame ``e_m / sqrt(t_m)``.  When ``c0`` is
    omitted it is set to the largest value with ``C_m <= t_m**2`` for every
    index, which makes the RKHS norm dominate the Ht* norm.
    """
    bw = besov_weights(basis.J, basis.J_max, beta_exp)
    t = bw.weights.t
    shape = bessel_eigen_profile(gamma, basis, 1.0)
    if c0 is None:
        c0 = float(np.min(t**2 / shape))
    return SpectralModel(c0 * shape, canonical_frame(bw.weights), bw.weights)
