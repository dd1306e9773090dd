"""Synthetic ground truths, dictionaries and observation noise."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix, normalize_columns, thin_svd
from .observation import ObservationSet, rng_for


@dataclass(frozen=True)
class SubspaceMixSpec:
    rows: int
    cols: int
    num_subspaces: int
    dim_per_subspace: int
    seed: int

    def __post_init__(self):
        k, r = self.num_subspaces, self.dim_per_subspace
        if min(self.rows, self.cols, k, r) < 1:
            raise ValueError("all SubspaceMixSpec sizes must be positive")
        if self.cols % k:
            raise ValueError(f"cols={self.cols} is not divisible by num_subspaces={k}")
        if k * r > min(self.rows, self.cols):
            raise ValueError(f"total rank {k * r} exceeds min(rows, cols)")

    @property
    def points_per_subspace(self) -> int:
        return self.cols // self.num_subspaces

    @property
    def rank(self) -> int:
        return self.num_subspaces * self.dim_per_subspace


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")


def random_basis(rng, rows, dim) -> np.ndarray:
    q, _ = np.linalg.qr(rng.standard_normal((rows, dim)))
    return q


def gen_subspace_mixture(spec: SubspaceMixSpec, verify=False) -> np.ndarray:
    """Concatenate ``k`` blocks ``B_i @ C_i`` column-wise.

    ``B_i`` is an orthonormalized Gaussian ``rows x r_s`` draw and ``C_i`` an
    ``r_s x n_s`` standard Gaussian coefficient matrix. With ``verify`` the
    rank of the result is checked against ``k * r_s``.
    """
    rng = rng_for(spec.seed)
    n_s = spec.points_per_subspace
    blocks = []
    for _ in range(spec.num_subspaces):
        basis = random_basis(rng, spec.rows, spec.dim_per_subspace)
        blocks.append(basis @ rng.standard_normal((spec.dim_per_subspace, n_s)))
    out = np.hstack(blocks)
    if verify:
        got = thin_svd(out).rank
        if got != spec.rank:
            raise RuntimeError(f"generated rank {got}, expected {spec.rank}")
    return out


def gen_coherent_rank1(n: int) -> np.ndarray:
    """``n x n`` matrix whose first column is all ones and everything else zero."""
    if n < 2:
        raise ValueError("n must be at least 2")
    out = np.zeros((n, n))
    out[:, 0] = 1.0
    return out


def gen_fig3_dictionary(n: int, p: int, seed) -> np.ndarray:
    """Column-normalized ``[1, W]`` with ``W`` an ``n x p`` Gaussian matrix."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    rng = rng_for(seed)
    a = np.hstack([np.ones((n, 1)), rng.standard_normal((n, p))])
    return normalize_columns(a)


def gen_oracle_dictionary(l0, rank_a: int, cols: int, seed) -> np.ndarray:
    """Unit-column dictionary whose span contains the column space of ``l0``.

    The span is ``col(l0)`` plus ``rank_a - rank(l0)`` random Gaussian
    directions; ``cols`` columns are drawn as Gaussian combinations of that
    span and normalized.
    """
    l0 = as_matrix(l0, "l0")
    u0 = thin_svd(l0).u
    if rank_a < u0.shape[1] or rank_a > l0.shape[0]:
        raise ValueError("rank_a must lie between rank(l0) and rows")
    if cols < rank_a:
        raise ValueError("cols must be at least rank_a")
    rng = rng_for(seed)
    extra = rng.standard_normal((l0.shape[0], rank_a - u0.shape[1]))
    span, _ = np.linalg.qr(np.hstack([u0, extra]))
    return normalize_columns(span @ rng.standard_normal((rank_a, cols)))


def add_observation_noise(x, omega: ObservationSet, spec: NoiseSpec) -> np.ndarray:
    """Add i.i.d. N(0, sigma^2) noise to the entries in ``omega`` only."""
    a = as_matrix(x)
    if a.shape != omega.shape:
        raise ValueError("matrix and observation set shapes differ")
    out = a.copy()
    if spec.sigma == 0:
        return out
    rng = rng_for(spec.seed)
    i, j = omega.indices[:, 0], omega.indices[:, 1]
    out[i, j] += spec.sigma * rng.standard_normal(omega.count)
    return out
