"""Two-stage completion (CONO estimate -> learned dictionary -> LRFD) and
numerical checks of the recovery guarantees behind it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .coherence import coherence
from .linalg import EmptyDictionaryError, as_matrix, normalize_columns, thin_svd
from .observation import ObservationSet, SubspaceBasis, rng_for
from .solvers import SolverConfig, SolverReport, solve_cono, solve_lrfd

RANK_THRESHOLD = 1e-3


class DegenerateEstimateError(RuntimeError):
    pass


class NeumannDivergenceError(ValueError):
    pass


class PowerIterationError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (last relative change {residual:.3e})")
        self.residual = residual


@dataclass
class PipelineResult:
    cono_estimate: np.ndarray
    rank_estimate: int
    truncated: np.ndarray
    dictionary: np.ndarray
    final_estimate: np.ndarray
    cono_report: SolverReport
    lrfd_report: SolverReport


@dataclass(frozen=True)
class TheoremDiagnostics:
    """Quantities in the exact-recovery hypotheses.

    ``rank_ratio`` is ``rank(A) * mu1(A) * log(n1) / n2``, i.e. the rank
    bound with the unknown constant and ``delta**2`` left out, so it can be
    compared across instances but not turned into a pass/fail verdict.
    """

    rank_l0: int
    rank_a: int
    mu1_a: float
    subspace_containment_residual: float
    rank_ratio: float
    omega_fraction: float


def estimate_rank(singular_values) -> int:
    """Number of singular values strictly above ``1e-3`` times the largest."""
    s = np.asarray(singular_values, dtype=np.float64).ravel()
    if s.size == 0:
        raise ValueError("empty spectrum")
    if np.any(np.diff(s) > 0):
        raise ValueError("singular values must be non-increasing")
    return int(np.count_nonzero(s > RANK_THRESHOLD * s[0]))


def truncate_to_rank(m, r: int) -> np.ndarray:
    """Best rank-``r`` approximation (top ``r`` singular triplets)."""
    if r < 1:
        raise ValueError("r must be at least 1")
    f = thin_svd(m)
    k = min(r, f.rank)
    return (f.u[:, :k] * f.sigma[:k]) @ f.v[:, :k].T


def run_algorithm1(x, omega: ObservationSet, lam: float = 100.0,
                   cfg: SolverConfig | None = None,
                   cono_report: SolverReport | None = None) -> PipelineResult:
    """CONO estimate, rank estimate, truncation, column normalization, LRFD.

    Both solves use the same ``lam``. A CONO report computed earlier with that
    same ``lam`` can be passed in to skip the first solve.
    """
    cfg = replace(cfg or SolverConfig(), lam=lam)
    if omega.count == 0:
        raise ValueError("observation set is empty")
    if cono_report is None:
        cono_report = solve_cono(x, omega, cfg)
    elif cono_report.lam != lam:
        raise ValueError("precomputed CONO report used a different lambda")
    l_hat = cono_report.solution
    f = thin_svd(l_hat)
    if f.rank == 0:
        raise DegenerateEstimateError("degenerate estimate: CONO returned the zero matrix")
    r_hat = estimate_rank(f.sigma)
    truncated = (f.u[:, :r_hat] * f.sigma[:r_hat]) @ f.v[:, :r_hat].T
    try:
        dictionary = normalize_columns(truncated)
    except EmptyDictionaryError:
        raise DegenerateEstimateError("degenerate estimate: truncated estimate is zero") from None
    lrfd_report = solve_lrfd(x, dictionary, omega, cfg)
    return PipelineResult(
        cono_estimate=l_hat, rank_estimate=r_hat, truncated=truncated,
        dictionary=dictionary, final_estimate=lrfd_report.reconstruction,
        cono_report=cono_report, lrfd_report=lrfd_report)


def check_theorem_conditions(l0, a, omega: ObservationSet) -> TheoremDiagnostics:
    l0 = as_matrix(l0, "l0")
    a = as_matrix(a, "dictionary")
    if l0.shape[0] != a.shape[0] or l0.shape != omega.shape:
        raise ValueError("incompatible dimensions")
    u0 = thin_svd(l0).u
    ua = thin_svd(a).u
    residual = float(np.linalg.norm(ua @ (ua.T @ u0) - u0))
    mu1 = coherence(a).mu1
    n1, n2 = max(l0.shape), min(l0.shape)
    return TheoremDiagnostics(
        rank_l0=u0.shape[1], rank_a=ua.shape[1], mu1_a=mu1,
        subspace_containment_residual=residual,
        rank_ratio=ua.shape[1] * mu1 * math.log(n1) / n2,
        omega_fraction=omega.fraction)


def _composed(u, unobserved):
    """M -> P_U P_{Omega^c} P_U (M) on rows x cols matrices."""

    def apply(m):
        pm = u @ (u.T @ m)
        return u @ (u.T @ np.where(unobserved, pm, 0.0))

    return apply


def lemma1_operator_norm(u_a: SubspaceBasis, omega: ObservationSet, tol=1e-8,
                         max_iters=1000, seed=0) -> float:
    """Operator norm of ``P_U P_{Omega^c} P_U`` by power iteration.

    The map is symmetric positive semidefinite, so its norm is the top
    eigenvalue; iteration stops when the Rayleigh quotient changes by at most
    ``tol`` relative to its value.
    """
    u = u_a.basis
    if u.shape[0] != omega.rows:
        raise ValueError("basis and observation set disagree on row count")
    unobserved = ~omega.mask
    if not unobserved.any():
        return 0.0
    op = _composed(u, unobserved)
    rng = rng_for(seed)
    m = u @ (u.T @ rng.standard_normal(omega.shape))
    m /= np.linalg.norm(m)
    est = 0.0
    change = math.inf
    for _ in range(max_iters):
        w = op(m)
        new = float(np.sum(m * w))
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return 0.0
        m = w / nw
        change = abs(new - est) / new if new > 0 else abs(new - est)
        if change <= tol:
            return new
        est = new
    raise PowerIterationError(f"power iteration did not settle in {max_iters} steps", change)


def lemma2_inverse_check(u_a: SubspaceBasis, omega: ObservationSet, terms: int,
                         probes: int = 10, seed: int = 0, psi: float | None = None) -> float:
    """Worst relative error of the truncated Neumann inverse on random probes.

    For probes ``M`` in the range of ``P_U`` it returns
    ``max ||(I + sum_{i<=terms} K^i)(P_U P_Omega P_U M) - M||_F / ||M||_F``
    with ``K = P_U P_{Omega^c} P_U``. Requires ``||K|| < 1``; pass ``psi`` to
    skip recomputing it.
    """
    if terms < 0:
        raise ValueError("terms must be nonnegative")
    if psi is None:
        psi = lemma1_operator_norm(u_a, omega)
    if psi >= 1.0:
        raise NeumannDivergenceError(f"Neumann series diverges: operator norm {psi:.6f} >= 1")
    u = u_a.basis
    mask = omega.mask
    k_op = _composed(u, ~mask)
    rng = rng_for(seed)
    worst = 0.0
    for _ in range(probes):
        m = u @ (u.T @ rng.standard_normal(omega.shape))
        pm = u @ (u.T @ m)
        y = u @ (u.T @ np.where(mask, pm, 0.0))
        total = y.copy()
        term = y
        for _ in range(terms):
            term = k_op(term)
            total += term
        worst = max(worst, float(np.linalg.norm(total - m) / np.linalg.norm(m)))
    return worst
