"""Coherence parameters of a matrix and the relative recovery error."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, thin_svd


@dataclass(frozen=True)
class CoherenceReport:
    mu1: float
    mu2: float
    rank_used: int


def coherence(m) -> CoherenceReport:
    """Column-space (``mu1``) and row-space (``mu2``) coherence.

    ``mu1 = (rows / r) * max_i ||U[i, :]||^2`` and likewise for ``mu2`` with
    the right singular vectors, where ``r`` is the numerical rank.
    """
    a = as_matrix(m)
    f = thin_svd(a)
    if f.rank == 0:
        raise ValueError("coherence is undefined for the zero matrix")
    r = f.rank
    mu1 = a.shape[0] / r * float(np.max(np.sum(f.u**2, axis=1)))
    mu2 = a.shape[1] / r * float(np.max(np.sum(f.v**2, axis=1)))
    return CoherenceReport(mu1=mu1, mu2=mu2, rank_used=r)


def recovery_error(estimate, truth) -> float:
    """``||estimate - truth||_F / ||truth||_F``."""
    est = as_matrix(estimate, "estimate")
    tru = as_matrix(truth, "truth")
    if est.shape != tru.shape:
        raise ValueError(f"shape mismatch {est.shape} vs {tru.shape}")
    denom = np.linalg.norm(tru)
    if denom == 0:
        raise ValueError("recovery error is undefined for a zero ground truth")
    return float(np.linalg.norm(est - tru) / denom)
