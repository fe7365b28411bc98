"""Spectral constants, operator norms, bound audits and Monte Carlo rate runs.

Three operator norms are used throughout:

* ``hs``   Hilbert-Schmidt norm in Ht (Frobenius norm of ``T^{1/2} A T^{-1/2}``),
* ``op_h`` operator norm in Ht (spectral norm of the same matrix),
* ``op_b`` operator norm in B, which in coefficient space is the sup-norm
  operator norm, i.e. the largest absolute row sum of ``A``.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .estimator import (
    Eigensystem,
    TruncationRule,
    align,
    empirical_moments,
    projector,
    select_truncation,
    spectral_decomposition,
    truncated_estimator,
)
from .exceptions import ContractError
from .gelfand import SpectralModel, Weights, norm, to_symmetric
from .process import ARBModel, Trajectory, derive_seed, simulate, theoretical_moments

SQRT8 = 2.0 * math.sqrt(2.0)
HOLDS_SLACK = 1e-12

TRACKED = (
    "cov_hs",
    "crosscov_hs",
    "eig_sup",
    "eig_sup_scaled",
    "rho_op_b",
    "prediction_b",
    "prediction_zero_b",
)


def _inverse_gaps(C: np.ndarray) -> np.ndarray:
    """``1 / (C_j - C_{j+1})`` for j = 1..M with ``C_{M+1} = 0``."""
    padded = np.append(C, 0.0)
    return 1.0 / (padded[:-1] - padded[1:])


def _a_sequence(C: np.ndarray) -> np.ndarray:
    inv = _inverse_gaps(C)
    a = np.empty_like(inv)
    a[0] = SQRT8 * inv[0]
    a[1:] = SQRT8 * np.maximum(inv[:-1], inv[1:])
    return a


@dataclass(frozen=True)
class ConstantsReport:
    """Eigen-gap constants and frame constants of a spectral model.

    ``a`` covers ``j = 1..M-1`` (each entry needs ``C_{j+1}``).  ``chain``
    maps each link of the ordering ``k < 1/C_k < 1/(C_k - C_{k+1}) < a_k <
    Lambda_k`` plus ``Lambda_k <= sum_{j<=k} a_j`` to a boolean.
    """

    k: int
    a: np.ndarray
    Lambda: float
    N_m: np.ndarray
    N: float
    V: float
    chain: dict = field(default_factory=dict)

    @property
    def forced_links_hold(self) -> bool:
        return self.chain["inv_eig_lt_inv_gap"] and self.chain["inv_gap_lt_a"]


def spectral_constants(model: SpectralModel, k: int) -> ConstantsReport:
    """Eigen-gap quantities ``a_j``, ``Lambda_k`` and frame constants ``N_m``, ``N``, ``V``."""
    C = model.eigenvalues
    M = C.size
    if not 1 <= k <= M - 1:
        raise ContractError(f"k must lie in 1..{M - 1} (gaps need C_(k+1)), got {k}")
    a = _a_sequence(C)[: M - 1]
    inv_gap = _inverse_gaps(C)
    Lam = float(np.max(inv_gap[:k]))
    Phi = model.eigenvectors
    N_m = np.sum(Phi**2, axis=1)
    a_k = float(a[k - 1])
    chain = {
        "k_lt_inv_eig": k < 1.0 / C[k - 1],
        "inv_eig_lt_inv_gap": 1.0 / C[k - 1] < inv_gap[k - 1],
        "inv_gap_lt_a": inv_gap[k - 1] < a_k,
        "a_lt_Lambda": a_k < Lam,
        "Lambda_le_sum_a": Lam <= float(np.sum(a[:k])),
    }
    chain = {key: bool(v) for key, v in chain.items()}
    return ConstantsReport(k, a, Lam, N_m, float(N_m.max()), float(np.max(np.abs(Phi))), chain)


def operator_norms(A, w: Weights) -> tuple[float, float, float]:
    """``(hs, op_h, op_b)`` of a coefficient matrix."""
    A = np.asarray(A, dtype=float)
    S = to_symmetric(A, w)
    hs = float(np.linalg.norm(S, "fro"))
    op_h = float(np.linalg.norm(S, 2))
    op_b = float(np.max(np.sum(np.abs(A), axis=1)))
    return hs, op_h, op_b


def kernel_matrix(source, w: Weights | None = None) -> np.ndarray:
    """Kernel ``K[k, l] = C(F_k)(F_l)`` of a covariance.

    ``source`` may be a SpectralModel, an Eigensystem or a coefficient matrix
    (the latter needs ``w``; then ``K = A T^{-1}``).
    """
    if isinstance(source, SpectralModel):
        Phi = source.eigenvectors
        return (Phi * source.eigenvalues) @ Phi.T
    if isinstance(source, Eigensystem):
        V = source.vectors
        return (V * source.values) @ V.T
    if w is None:
        raise ContractError("a coefficient matrix needs weights to form its kernel")
    A = np.asarray(source, dtype=float)
    return A / w.t[None, :]


def kernel_sup_distance(C_true, eigs_emp, w: Weights) -> float:
    """``sup_{k,l} |c(F_k, F_l) - c_n(F_k, F_l)|``."""
    K1 = kernel_matrix(C_true, w)
    K2 = kernel_matrix(eigs_emp, w)
    return float(np.max(np.abs(K1 - K2)))


@dataclass(frozen=True)
class AuditRecord:
    """One audited inequality ``lhs <= rhs``.

    ``status`` is ``"checked"`` for non-asymptotic statements and for
    asymptotic ones at ``n >= n_min``; otherwise ``"informational"``.
    """

    name: str
    lhs: float
    rhs: float
    holds: bool
    n: int
    replicate: int
    status: str = "checked"

    @property
    def shortfall(self) -> float:
        return max(0.0, self.lhs - self.rhs)


@dataclass
class BoundReport:
    n: int
    replicate: int
    k: int
    records: list = field(default_factory=list)
    K1: float = float("nan")
    K2: float = float("nan")
    defects: dict = field(default_factory=dict)

    def record(self, name: str) -> AuditRecord:
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    def rows(self):
        """Long-format rows ``(n, replicate, metric, value)``."""
        for r in self.records:
            yield self.n, self.replicate, f"{r.name}.lhs", r.lhs
            yield self.n, self.replicate, f"{r.name}.rhs", r.rhs
            yield self.n, self.replicate, f"{r.name}.holds", float(r.holds)
        yield self.n, self.replicate, "covariance_ratio.K1", self.K1
        yield self.n, self.replicate, "covariance_ratio.K2", self.K2
        for name, value in self.defects.items():
            yield self.n, self.replicate, name, value


def _holds(lhs: float, rhs: float) -> bool:
    return lhs <= rhs + HOLDS_SLACK * max(1.0, abs(rhs))


def kernel_bound_record(model: SpectralModel, n: int = 0, replicate: int = 0) -> AuditRecord:
    """``sup |c(F_k, F_l)| <= N ||C||_L(Ht)``; holds for every model, so always checked."""
    Phi = model.eigenvectors
    lhs = float(np.max(np.abs(kernel_matrix(model))))
    rhs = float(np.max(np.sum(Phi**2, axis=1))) * float(model.eigenvalues[0])
    return AuditRecord("kernel_bound", lhs, rhs, _holds(lhs, rhs), n, replicate)


def audit_moments(
    model: ARBModel,
    C_n,
    D_n,
    n: int,
    k: int,
    replicate: int = 0,
    n_min: int = 512,
    probes: int = 1000,
    seed: int = 0,
) -> BoundReport:
    """Assemble both sides of each audited bound from given moment operators."""
    w = model.weights
    sp = model.spectral
    C, _ = theoretical_moments(model)
    C_n = np.asarray(C_n, dtype=float)
    eigs = align(spectral_decomposition(C_n, w), sp.eigenvectors)
    if not 1 <= k <= eigs.rank:
        raise ContractError(f"audit level k={k} outside 1..rank={eigs.rank}")
    status = "checked" if n >= n_min else "informational"
    rep = BoundReport(n, replicate, k)

    _, normC, _ = operator_norms(C, w)
    _, normCn, _ = operator_norms(C_n, w)
    dC_S, dC_L, _ = operator_norms(C - C_n, w)
    Phi = sp.eigenvectors
    N_m = np.sum(Phi**2, axis=1)
    N = float(N_m.max())
    V = float(np.max(np.abs(Phi)))
    f_sup = float(np.max(np.abs(eigs.aligned)))
    Lam = float(np.max(_inverse_gaps(sp.eigenvalues)[:k]))
    diff = eigs.vectors - eigs.aligned
    h_err = np.sqrt(np.sum(w.t[:, None] * diff**2, axis=0))
    b_err = np.max(np.abs(diff), axis=0)
    tail = float(np.sum(h_err[k:] ** 2))
    bracket = dC_L + 2.0 * max(math.sqrt(normC), math.sqrt(normCn)) * f_sup * math.sqrt(
        k * 8.0 * Lam**2 * dC_L**2 + tail
    )
    nfac = max(N, math.sqrt(N))

    rep.records.append(kernel_bound_record(sp, n, replicate))

    lhs7 = kernel_sup_distance(sp, eigs, w)
    rhs7 = nfac * bracket
    rep.records.append(AuditRecord("kernel_perturbation", lhs7, rhs7, _holds(lhs7, rhs7), n, replicate, status))

    lhs8 = float(np.max(b_err[:k]))
    C_k = float(sp.eigenvalues[k - 1])
    rhs8 = (2.0 / C_k) * (nfac * bracket + float(np.max(h_err[:k])) * N * np.linalg.norm(
        to_symmetric(C, w), "fro"
    ) + V * dC_S)
    rep.records.append(AuditRecord("eigvec_perturbation", lhs8, rhs8, _holds(lhs8, rhs8), n, replicate, status))

    if k < sp.M:
        inv_gap = float(_inverse_gaps(sp.eigenvalues)[k - 1])
        a_k = float(_a_sequence(sp.eigenvalues)[k - 1])
        inv_eig = 1.0 / C_k
        rep.records.append(AuditRecord(
            "gap_chain.inv_eig_lt_inv_gap", inv_eig, inv_gap, inv_eig < inv_gap, n, replicate))
        rep.records.append(AuditRecord("gap_chain.inv_gap_lt_a", inv_gap, a_k, inv_gap < a_k, n, replicate))
        rep.records.append(AuditRecord(
            "gap_chain.k_lt_inv_eig", float(k), inv_eig, k < inv_eig, n, replicate, status))

    rng = np.random.default_rng(seed)
    Vk = eigs.vectors[:, :k]
    probe = rng.standard_normal((probes, k)) @ Vk.T
    qn = np.einsum("pi,ij,pj->p", probe * w.t, C_n, probe)
    q = np.einsum("pi,ij,pj->p", probe * w.t, C, probe)
    ratio = qn / q
    rep.K1, rep.K2 = float(ratio.min()), float(ratio.max())

    rho = model.rho_operator()
    P_true = Phi[:, :k] @ Phi[:, :k].T * w.t[None, :]
    P_emp = projector(eigs, k)
    rep.defects["truncation_defect"] = operator_norms(rho - P_true @ rho, w)[2]
    rep.defects["projection_defect"] = operator_norms(rho - P_emp @ rho @ P_emp, w)[2]
    return rep


def inequality_audit(
    model: ARBModel,
    traj: Trajectory,
    k_n: int,
    w: Weights | None = None,
    replicate: int = 0,
    n_min: int = 512,
    probes: int = 1000,
    seed: int = 0,
) -> BoundReport:
    """Audit the eigenvector and kernel bounds on one simulated trajectory."""
    w = model.weights if w is None else w
    if w.M != model.M or np.any(w.t != model.weights.t):
        raise ContractError("audit weights differ from the model weights")
    mom = empirical_moments(traj, w)
    return audit_moments(model, mom.C, mom.D, mom.n, k_n, replicate, n_min, probes, seed)


@dataclass(frozen=True)
class RateReport:
    """Medians of a tracked error along an n-grid and the log-log fit.

    The fit regresses ``log(median)`` on ``log(sqrt(ln n / n))``; with fewer
    than two grid points (or a zero median) ``fitted`` is False and slope,
    intercept and r2 are NaN.
    """

    metric: str
    n_grid: np.ndarray
    values: np.ndarray
    medians: np.ndarray
    slope: float
    intercept: float
    r2: float
    fitted: bool


def rate_abscissa(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    return 0.5 * np.log(np.log(n) / n)


def fit_rate(metric: str, n_grid, values) -> RateReport:
    n_grid = np.asarray(n_grid)
    values = np.asarray(values, dtype=float)
    medians = np.median(values, axis=1)
    slope = intercept = r2 = float("nan")
    fitted = n_grid.size >= 2 and bool(np.all(medians > 0))
    if fitted:
        res = stats.linregress(rate_abscissa(n_grid), np.log(medians))
        slope, intercept, r2 = float(res.slope), float(res.intercept), float(res.rvalue**2)
    return RateReport(metric, n_grid, values, medians, slope, intercept, r2, fitted)


def replicate_errors(
    model: ARBModel,
    n: int,
    seed: int,
    rule: TruncationRule = TruncationRule(),
    burn_in: int | None = None,
) -> dict:
    """Every tracked error metric for one simulated trajectory of length n."""
    w = model.weights
    traj = simulate(model, n, burn_in, seed)
    mom = empirical_moments(traj, w)
    C, D = theoretical_moments(model)
    eigs = spectral_decomposition(mom, w)
    k = select_truncation(eigs, n, rule)
    rho = model.rho_operator()
    rho_hat = truncated_estimator(mom.D, eigs, k)
    x = traj.samples[-1]
    eig_sup = float(np.max(np.abs(eigs.values - model.spectral.eigenvalues)))
    return {
        "k": k,
        "cov_hs": operator_norms(mom.C - C, w)[0],
        "crosscov_hs": operator_norms(mom.D - D, w)[0],
        "eig_sup": eig_sup,
        "eig_sup_scaled": math.sqrt(n / math.log(n)) * eig_sup,
        "rho_op_b": operator_norms(rho_hat - rho, w)[2],
        "prediction_b": norm(rho_hat @ x - rho @ x, w, "B"),
        "prediction_zero_b": norm(rho @ x, w, "B"),
    }


def _replicate_task(args):
    return replicate_errors(*args)


def _validate_grid(n_grid, replicates: int) -> np.ndarray:
    grid = np.asarray(n_grid, dtype=int)
    if grid.ndim != 1 or grid.size == 0:
        raise ContractError("n-grid must be a non-empty 1-D sequence")
    if np.any(grid < 2) or np.any(np.diff(grid) <= 0):
        raise ContractError("n-grid must be strictly increasing with every n >= 2")
    if replicates < 1:
        raise ContractError(f"need at least one replicate, got {replicates}")
    return grid


def run_replicates(
    model: ARBModel,
    n_grid,
    replicates: int,
    rule: TruncationRule = TruncationRule(),
    master_seed: int = 0,
    burn_in: int | None = None,
    workers: int = 1,
) -> dict:
    """Collect every tracked metric as an array of shape (len(n_grid), replicates).

    Replicate ``r`` uses ``derive_seed(master_seed, r)`` at every grid point, so
    results do not depend on ``workers`` and the shorter trajectories of a
    replicate are prefixes of its longer ones.
    """
    grid = _validate_grid(n_grid, replicates)
    tasks = [
        (model, int(n), derive_seed(master_seed, r), rule, burn_in)
        for n in grid
        for r in range(replicates)
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_replicate_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        results = [_replicate_task(t) for t in tasks]
    keys = results[0].keys()
    return {
        key: np.array([r[key] for r in results], dtype=float).reshape(grid.size, replicates)
        for key in keys
    }


def rate_experiment(
    model: ARBModel,
    n_grid,
    replicates: int,
    rule: TruncationRule = TruncationRule(),
    tracked=("cov_hs",),
    master_seed: int = 0,
    burn_in: int | None = None,
    workers: int = 1,
) -> dict:
    """Median error per grid point and log-log rate fit for each tracked metric.

    Returns a mapping ``metric -> RateReport``.
    """
    if isinstance(tracked, str):
        tracked = (tracked,)
    unknown = set(tracked) - set(TRACKED)
    if unknown:
        raise ContractError(f"unknown tracked metrics {sorted(unknown)}; choose from {TRACKED}")
    data = run_replicates(model, n_grid, replicates, rule, master_seed, burn_in, workers)
    grid = np.asarray(n_grid, dtype=int)
    return {m: fit_rate(m, grid, data[m]) for m in tracked}


@dataclass(frozen=True)
class TailReport:
    eta: float
    n_grid: np.ndarray
    frequency: np.ndarray
    k: np.ndarray
    shape_proxy: np.ndarray
    errors: np.ndarray


def shape_proxy(model: SpectralModel, k: int) -> float:
    """``k / C_k * sum_{j<=k} a_j``, the k-dependent factor of the tail exponent."""
    C = model.eigenvalues
    a = _a_sequence(C)
    return float(k / C[k - 1] * np.sum(a[:k]))


def tail_experiment(
    model: ARBModel,
    n_grid,
    replicates: int,
    eta: float | None = None,
    rule: TruncationRule = TruncationRule(),
    master_seed: int = 0,
    burn_in: int | None = None,
    workers: int = 1,
) -> TailReport:
    """Empirical ``P(||rho_tilde - rho||_L(B) >= eta)`` along an n-grid.

    ``eta=None`` fixes the threshold at the median error of the smallest n.
    """
    if eta is not None and not eta > 0:
        raise ContractError(f"eta must be positive, got {eta}")
    data = run_replicates(model, n_grid, replicates, rule, master_seed, burn_in, workers)
    return tail_from_replicates(model, n_grid, data, eta)


def tail_from_replicates(model: ARBModel, n_grid, data: dict, eta: float | None = None) -> TailReport:
    """Tail frequencies from the output of :func:`run_replicates`."""
    errors = data["rho_op_b"]
    if eta is None:
        eta = float(np.median(errors[0]))
    freq = np.mean(errors >= eta, axis=1)
    ks = np.median(data["k"], axis=1).astype(int)
    proxy = np.array([shape_proxy(model.spectral, int(k)) for k in ks])
    return TailReport(float(eta), np.asarray(n_grid, dtype=int), freq, ks, proxy, errors)
