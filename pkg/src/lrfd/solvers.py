"""Proximal-gradient solvers for nuclear-norm completion (CONO) and its
dictionary form (LRFD).

CONO:  min_L ||L||_* + (lam/2) ||P_Omega(X - L)||_F^2
LRFD:  min_Z ||Z||_* + (lam/2) ||P_Omega(X - A Z)||_F^2

Both use step 1/Lipschitz, so the gradient step does not depend on ``lam``
and only the singular value threshold does. The accelerated mode adds
Nesterov momentum with function-value restart and geometric continuation
of the threshold from a large value down to the target.

LRFD is solved in the row space of ``A``: with ``A = U_A S_A V_A^T`` every
minimizer has the form ``Z = V_A W``, and the iteration on ``W`` with
``B = U_A S_A`` produces exactly ``V_A^T`` times the iterates on ``Z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .linalg import as_matrix, shrink, singular_values, thin_svd
from .observation import ObservationSet

CONSTRAINED_LAMBDAS = tuple(10.0**k for k in range(2, 10))
CONTINUATION_RATIO = 0.7


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 100.0
    max_iters: int = 5000
    rel_tol: float = 1e-7
    # stationarity required at the target threshold
    tol: float = 1e-3
    acceleration: bool = True
    # threshold continuation; only used together with acceleration
    continuation: bool = True
    stage_tol: float = 1e-3
    stage_iters: int = 100
    svd_method: str = "lapack"

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        if not self.rel_tol > 0 or not self.tol > 0:
            raise ValueError("rel_tol and tol must be positive")
        if self.max_iters < 1 or self.stage_iters < 1:
            raise ValueError("max_iters and stage_iters must be at least 1")
        if not self.stage_tol > 0:
            raise ValueError("stage_tol must be positive")


@dataclass
class SolverReport:
    """Outcome of one solve.

    ``solution`` is L* for CONO and Z* for LRFD; ``reconstruction`` is the
    completed matrix (L* or A Z*). ``objective_trace`` holds the objective at
    the target ``lam`` after every accepted iterate. ``stationarity`` is the
    last gradient-mapping norm divided by ``max(1, ||grad f||)``.
    """

    solution: np.ndarray
    reconstruction: np.ndarray
    objective_trace: list
    iterations: int
    terminal_relative_change: float
    converged: bool
    lam: float
    restarts: int = 0
    stationarity: float = math.inf
    constraint_residual: float | None = None


def _check_inputs(x, omega):
    x = as_matrix(x, "x")
    if x.shape != omega.shape:
        raise ValueError(f"x has shape {x.shape}, observation set is {omega.shape}")
    return x


def _proximal_gradient(v0, gradient_step, residual_sq, scale, cfg, callback=None,
                       tau_start=None):
    """Shared iteration.

    ``gradient_step(v)`` is ``v - grad f(v) / Lipschitz``, ``residual_sq(v)``
    is ``||P_Omega(X - op(v))||^2`` and the Lipschitz constant is
    ``lam * scale``.

    With continuation the threshold starts at ``tau_start`` (default: half
    the top singular value of the first gradient step) and is multiplied by
    ``CONTINUATION_RATIO`` whenever the current stage is stationary to within
    ``cfg.stage_tol`` or has used ``cfg.stage_iters`` iterations. At the
    target threshold the loop stops once the relative iterate change is at
    most ``cfg.rel_tol`` and the stationarity measure is at most ``cfg.tol``.
    """
    method = cfg.svd_method
    accel = cfg.acceleration
    tau_target = 1.0 / (cfg.lam * scale)
    if accel and cfg.continuation:
        if tau_start is None:
            tau_start = 0.5 * float(singular_values(gradient_step(v0))[0])
        tau = max(tau_start, tau_target)
    else:
        tau = tau_target

    v = v0
    v_prev = v0
    t = 1.0
    stage_best = math.inf
    stage_count = 0
    trace = []
    restarts = 0
    change = math.inf
    stationarity = math.inf
    converged = False
    it = 0
    while it < cfg.max_iters:
        it += 1
        stage_count += 1
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t)) if accel else 1.0
        if accel and t > 1.0:
            y = v + ((t - 1.0) / t_next) * (v - v_prev)
        else:
            y = v
        g = gradient_step(y)
        v_new, nuc, _ = shrink(g, tau, method)
        res = residual_sq(v_new)
        stage_obj = nuc + 0.5 * res / (tau * scale)
        if accel and t > 1.0 and stage_obj > stage_best:
            # function-value restart: drop momentum, redo from v
            t = 1.0
            v_prev = v
            restarts += 1
            continue
        change = float(np.linalg.norm(v_new - v) / max(1.0, np.linalg.norm(v)))
        # gradient mapping at y relative to the smooth gradient, both in threshold units
        stationarity = float(np.linalg.norm(y - v_new) / max(tau, np.linalg.norm(y - g)))
        trace.append(nuc + 0.5 * cfg.lam * res)
        v_prev, v = v, v_new
        t = t_next
        stage_best = stage_obj
        if callback is not None:
            callback(it, v)
        if tau > tau_target:
            if stationarity <= cfg.stage_tol or stage_count >= cfg.stage_iters:
                tau = max(tau * CONTINUATION_RATIO, tau_target)
                stage_best = math.inf
                stage_count = 0
                t = 1.0
        elif change <= cfg.rel_tol and stationarity <= cfg.tol:
            converged = True
            break
    return v, trace, it, change, stationarity, converged, restarts


# -- CONO ------------------------------------------------------------------

def cono_objective(l, x, omega: ObservationSet, lam) -> float:
    r = np.where(omega.mask, x - l, 0.0)
    return float(singular_values(l).sum() + 0.5 * lam * np.sum(r * r))


def cono_gradient(l, x, omega: ObservationSet, lam) -> np.ndarray:
    """Gradient of the smooth term: ``lam * P_Omega(L - X)``."""
    return lam * np.where(omega.mask, l - x, 0.0)


def cono_step(l, x, omega: ObservationSet, lam, method="lapack") -> np.ndarray:
    """One plain proximal-gradient step ``svt(L - P_Omega(L - X), 1/lam)``."""
    return shrink(np.where(omega.mask, x, l), 1.0 / lam, method)[0]


def cono_stationarity(l, x, omega, lam) -> float:
    """``lam ||L - cono_step(L)||_F / max(1, ||lam P_Omega(X - L)||_F)``; zero exactly at the minimizer."""
    mapping = lam * np.linalg.norm(l - cono_step(l, x, omega, lam))
    return float(mapping / max(1.0, np.linalg.norm(cono_gradient(l, x, omega, lam))))


def solve_cono(x, omega: ObservationSet, cfg: SolverConfig | None = None, init=None,
               callback=None, _tau_start=None) -> SolverReport:
    """Minimize the regularized CONO objective starting from ``P_Omega(X)``."""
    cfg = cfg or SolverConfig()
    x = _check_inputs(x, omega)
    mask = omega.mask
    xo = np.where(mask, x, 0.0)
    l0 = xo if init is None else as_matrix(init, "init")

    def gradient_step(l):
        return np.where(mask, xo, l)

    def residual_sq(l):
        r = np.where(mask, xo - l, 0.0)
        return float(np.sum(r * r))

    l, trace, it, change, stat, conv, restarts = _proximal_gradient(
        l0, gradient_step, residual_sq, 1.0, cfg, callback, _tau_start)
    return SolverReport(solution=l, reconstruction=l, objective_trace=trace,
                        iterations=it, terminal_relative_change=change,
                        converged=conv, lam=cfg.lam, restarts=restarts,
                        stationarity=stat)


# -- LRFD ------------------------------------------------------------------

def power_iteration_norm_sq(a, iters=50, tol=1e-10, seed=0) -> float:
    """Estimate ``||A||^2`` (largest eigenvalue of ``A^T A``) by power iteration."""
    a = as_matrix(a)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(a.shape[1])
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        w = a.T @ (a @ v)
        new = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        v = w / nw
        if abs(new - est) <= tol * max(new, 1e-300):
            return new
        est = new
    return est


def lrfd_objective(z, x, a, omega: ObservationSet, lam) -> float:
    r = np.where(omega.mask, x - a @ z, 0.0)
    return float(singular_values(z).sum() + 0.5 * lam * np.sum(r * r))


def lrfd_gradient(z, x, a, omega: ObservationSet, lam) -> np.ndarray:
    """Gradient of the smooth term: ``-lam * A^T P_Omega(X - A Z)``."""
    return -lam * (a.T @ np.where(omega.mask, x - a @ z, 0.0))


def lrfd_step(z, x, a, omega: ObservationSet, lam, a_norm_sq=None,
              method="lapack") -> np.ndarray:
    """One plain step ``svt(Z + A^T P_Omega(X - A Z) / c, 1/(lam c))`` with ``c = ||A||^2``."""
    c = power_iteration_norm_sq(a) if a_norm_sq is None else a_norm_sq
    g = z + (a.T @ np.where(omega.mask, x - a @ z, 0.0)) / c
    return shrink(g, 1.0 / (lam * c), method)[0]


def lrfd_stationarity(z, x, a, omega, lam, a_norm_sq=None) -> float:
    """LRFD analogue of :func:`cono_stationarity` with step ``1/(lam ||A||^2)``."""
    c = power_iteration_norm_sq(a) if a_norm_sq is None else a_norm_sq
    mapping = lam * c * np.linalg.norm(z - lrfd_step(z, x, a, omega, lam, c))
    return float(mapping / max(1.0, np.linalg.norm(lrfd_gradient(z, x, a, omega, lam))))


def solve_lrfd(x, a, omega: ObservationSet, cfg: SolverConfig | None = None, init=None,
               callback=None, _tau_start=None) -> SolverReport:
    """Minimize the regularized LRFD objective starting from ``Z = 0``.

    ``callback(k, Z_k)`` receives full-size iterates. An ``init`` with a
    component outside the row space of ``A`` is projected onto it first.
    """
    cfg = cfg or SolverConfig()
    x = _check_inputs(x, omega)
    a = as_matrix(a, "dictionary")
    if a.shape[0] != x.shape[0]:
        raise ValueError("dictionary must have as many rows as x")
    f = thin_svd(a)
    if f.rank == 0:
        raise ValueError("zero dictionary")
    b = f.u * f.sigma
    va = f.v
    c = float(f.sigma[0] ** 2)
    mask = omega.mask
    xo = np.where(mask, x, 0.0)
    w0 = np.zeros((f.rank, x.shape[1])) if init is None else va.T @ as_matrix(init, "init")

    def gradient_step(w):
        return w + (b.T @ np.where(mask, xo - b @ w, 0.0)) / c

    def residual_sq(w):
        r = np.where(mask, xo - b @ w, 0.0)
        return float(np.sum(r * r))

    inner = None if callback is None else (lambda k, w: callback(k, va @ w))
    w, trace, it, change, stat, conv, restarts = _proximal_gradient(
        w0, gradient_step, residual_sq, c, cfg, inner, _tau_start)
    return SolverReport(solution=va @ w, reconstruction=b @ w, objective_trace=trace,
                        iterations=it, terminal_relative_change=change,
                        converged=conv, lam=cfg.lam, restarts=restarts,
                        stationarity=stat)


# -- constrained forms via lam-continuation --------------------------------

def _constrained(solve, x, omega, epsilon, cfg, zero_shape):
    if epsilon < 0:
        raise ValueError("epsilon must be nonnegative")
    cfg = cfg or SolverConfig()
    x = _check_inputs(x, omega)
    xo = np.where(omega.mask, x, 0.0)
    observed_norm = float(np.linalg.norm(xo))
    if epsilon >= observed_norm:
        z = np.zeros(zero_shape)
        return SolverReport(solution=z, reconstruction=np.zeros_like(x), objective_trace=[0.0],
                            iterations=0, terminal_relative_change=0.0, converged=True,
                            lam=0.0, constraint_residual=observed_norm)
    prev = None
    prev_lam = None
    total = 0
    for lam in CONSTRAINED_LAMBDAS:
        tau_start = None if prev_lam is None else 1.0 / prev_lam
        rep = solve(replace(cfg, lam=lam), prev, tau_start)
        total += rep.iterations
        res = float(np.linalg.norm(np.where(omega.mask, x - rep.reconstruction, 0.0)))
        rep.iterations = total
        rep.constraint_residual = res
        if res <= epsilon:
            return rep
        prev, prev_lam = rep.solution, lam
    rep.converged = False
    return rep


def solve_cono_constrained(x, omega: ObservationSet, epsilon: float,
                           cfg: SolverConfig | None = None) -> SolverReport:
    """``min ||L||_*`` s.t. ``||P_Omega(X - L)||_F <= epsilon``.

    Solved as the regularized problem for lam = 1e2, 1e3, ..., 1e9 (each
    stage warm-started from the previous one); the first feasible solution
    is returned. ``cfg.lam`` is ignored.
    """
    x = as_matrix(x, "x")

    def solve(c, init, tau_start):
        return solve_cono(x, omega, c, init=init, _tau_start=tau_start)

    return _constrained(solve, x, omega, epsilon, cfg, x.shape)


def solve_lrfd_constrained(x, a, omega: ObservationSet, epsilon: float,
                           cfg: SolverConfig | None = None) -> SolverReport:
    """``min ||Z||_*`` s.t. ``||P_Omega(X - A Z)||_F <= epsilon``, same schedule as CONO."""
    x = as_matrix(x, "x")
    a = as_matrix(a, "dictionary")

    def solve(c, init, tau_start):
        # the threshold scales with 1/||A||^2 inside solve_lrfd
        scale = float(np.linalg.norm(a, 2) ** 2)
        ts = None if tau_start is None else tau_start / scale
        return solve_lrfd(x, a, omega, c, init=init, _tau_start=ts)

    return _constrained(solve, x, omega, epsilon, cfg, (a.shape[1], x.shape[1]))


__all__ = [
    "SolverConfig", "SolverReport", "solve_cono", "solve_lrfd", "solve_cono_constrained",
    "solve_lrfd_constrained", "cono_objective", "cono_gradient", "cono_step",
    "cono_stationarity", "lrfd_objective", "lrfd_gradient", "lrfd_step",
    "lrfd_stationarity", "power_iteration_norm_sq",
]
