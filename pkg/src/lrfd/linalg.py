"""Dense linear algebra used by every other module.

Matrices are plain ``numpy.ndarray`` objects of dtype float64 in row-major
(C) order. Functions validate their inputs with :func:`as_matrix` and never
mutate them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import _kernels

EPS = np.finfo(np.float64).eps


class SvdConvergenceError(RuntimeError):
    """The iterative SVD hit its sweep cap. ``residual`` is the last off-diagonal measure."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class EmptyDictionaryError(ValueError):
    pass


class NormKind(enum.Enum):
    OPERATOR = "operator"
    FROBENIUS = "frobenius"
    NUCLEAR = "nuclear"


def as_matrix(m, name="matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array, raising ``ValueError`` otherwise."""
    arr = np.asarray(m, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


@dataclass(frozen=True)
class ThinSvd:
    """Skinny SVD ``u @ diag(sigma) @ v.T`` keeping only the numerically nonzero triplets."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


def _jacobi_svd(a):
    m, n = a.shape
    transposed = m < n
    work = a.T if transposed else a
    tol = max(m, n) * EPS
    # unit max entry keeps the column inner products clear of under/overflow
    peak = float(np.abs(work).max())
    if peak > 0:
        work = work / peak
    w, v, sweeps, converged, off = _kernels.jacobi_orthogonalize(
        work, tol, 100 * min(m, n))
    if not converged:
        raise SvdConvergenceError(f"Jacobi SVD did not converge in {sweeps} sweeps", off)
    w = np.ascontiguousarray(w)
    s = np.sqrt(np.einsum("ij,ij->j", w, w))
    order = np.argsort(-s, kind="stable")
    s = s[order]
    w = w[:, order]
    v = np.ascontiguousarray(v[:, order])
    u = np.zeros_like(w)
    nz = s > 0
    u[:, nz] = w[:, nz] / s[nz]
    if peak > 0:
        s = s * peak
    if transposed:
        return v, s, u.T
    return u, s, v.T


def svd(a, method="lapack"):
    """Full-length thin factorization ``(u, s, vt)`` without rank truncation.

    ``method`` is ``"lapack"`` (numpy's gesdd driver) or ``"jacobi"`` (the
    in-repo one-sided Jacobi kernel).
    """
    if method == "lapack":
        try:
            if a.shape[0] < a.shape[1]:
                # gesdd is noticeably faster on the tall orientation
                u, s, vt = np.linalg.svd(a.T, full_matrices=False)
                return vt.T, s, u.T
            return np.linalg.svd(a, full_matrices=False)
        except np.linalg.LinAlgError as exc:
            raise SvdConvergenceError(f"LAPACK SVD failed: {exc}", float("nan")) from exc
    if method == "jacobi":
        return _jacobi_svd(np.asarray(a, dtype=np.float64))
    raise ValueError(f"unknown SVD method {method!r}")


def rank_cutoff(sigma, shape) -> float:
    """Singular values at or below this are numerically zero."""
    if sigma.size == 0:
        return 0.0
    return max(shape) * EPS * float(sigma[0])


def thin_svd(m, method="lapack") -> ThinSvd:
    a = as_matrix(m)
    u, s, vt = svd(a, method)
    keep = s > rank_cutoff(s, a.shape)
    if s.size and s[0] == 0:
        keep[:] = False
    return ThinSvd(u=u[:, keep], sigma=s[keep], v=vt[keep].T)


def pinv(m, method="lapack") -> np.ndarray:
    """Moore-Penrose pseudo-inverse ``V diag(1/sigma) U^T`` from the thin SVD."""
    f = thin_svd(m, method)
    return (f.v / f.sigma) @ f.u.T


def shrink(y, tau, method="lapack"):
    """Singular value soft-thresholding that also reports the result's nuclear norm and rank.

    This is the form the solvers call in their inner loop; it skips input
    validation.
    """
    u, s, vt = svd(y, method)
    s = s - tau
    k = int(np.count_nonzero(s > 0))
    out = (u[:, :k] * s[:k]) @ vt[:k]
    return out, float(s[:k].sum()), k


def svt(m, tau, method="lapack") -> np.ndarray:
    """Proximal operator of ``tau * ||.||_*``: ``U diag(max(sigma - tau, 0)) V^T``."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    return shrink(as_matrix(m), tau, method)[0]


def singular_values(m, method="lapack") -> np.ndarray:
    if method == "lapack":
        return np.linalg.svd(as_matrix(m), compute_uv=False)
    return svd(as_matrix(m), method)[1]


def norm(m, kind: NormKind) -> float:
    a = as_matrix(m)
    if kind is NormKind.FROBENIUS:
        return float(np.sqrt(np.sum(a * a)))
    s = singular_values(a)
    if kind is NormKind.OPERATOR:
        return float(s[0])
    if kind is NormKind.NUCLEAR:
        return float(s.sum())
    raise ValueError(f"unknown norm kind {kind!r}")


def normalize_columns(m) -> np.ndarray:
    """Scale every column to unit length and drop the zero columns.

    A column counts as zero when its norm is at most ``rows * eps`` times the
    largest column norm, the same relative cutoff used for numerical rank.
    """
    a = as_matrix(m)
    peak = np.abs(a).max()
    if peak == 0:
        raise EmptyDictionaryError("empty dictionary: every column is zero")
    # scale first so tiny entries do not underflow when squared
    b = a / peak
    lengths = np.sqrt(np.einsum("ij,ij->j", b, b))
    keep = lengths > a.shape[0] * EPS * lengths.max()
    return b[:, keep] / lengths[keep]
