"""Observation sets and the projectors built on them.

Random draws use numpy's ``PCG64`` generator (PCG-XSL-RR 128/64) seeded
directly with the user's 64-bit seed, so the same (shape, model, seed)
always yields the same index set.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .linalg import as_matrix, thin_svd


@dataclass(frozen=True)
class BernoulliRho:
    """Each entry observed independently with probability ``rho``."""

    rho: float


@dataclass(frozen=True)
class UniformExactCount:
    """Exactly ``count`` entries chosen uniformly without replacement."""

    count: int


@dataclass(frozen=True)
class Explicit:
    """Index set supplied by the caller (e.g. read from a mask file)."""


def rng_for(seed) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


@dataclass(frozen=True, eq=False)
class ObservationSet:
    """Observed entries Omega of a ``rows x cols`` matrix.

    ``indices`` is an (count, 2) int64 array of 0-based ``(i, j)`` pairs,
    sorted row-major and free of duplicates.
    """

    rows: int
    cols: int
    indices: np.ndarray
    model: object = field(default_factory=Explicit)
    seed: int | None = None

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("rows and cols must be positive")
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1, 2)
        if idx.size:
            if idx.min() < 0 or idx[:, 0].max() >= self.rows or idx[:, 1].max() >= self.cols:
                raise ValueError("observation index out of range")
        flat = np.unique(idx[:, 0] * self.cols + idx[:, 1])
        canon = np.stack([flat // self.cols, flat % self.cols], axis=1)
        canon.setflags(write=False)
        object.__setattr__(self, "indices", canon)

    @classmethod
    def from_mask(cls, mask, model=None, seed=None) -> ObservationSet:
        mask = np.asarray(mask, dtype=bool)
        return cls(mask.shape[0], mask.shape[1], np.argwhere(mask),
                   model if model is not None else Explicit(), seed)

    @classmethod
    def full(cls, rows, cols) -> ObservationSet:
        return cls.from_mask(np.ones((rows, cols), dtype=bool))

    @classmethod
    def empty(cls, rows, cols) -> ObservationSet:
        return cls(rows, cols, np.zeros((0, 2), dtype=np.int64))

    @property
    def shape(self):
        return (self.rows, self.cols)

    @property
    def count(self) -> int:
        return int(self.indices.shape[0])

    @property
    def fraction(self) -> float:
        return self.count / (self.rows * self.cols)

    @cached_property
    def mask(self) -> np.ndarray:
        m = np.zeros((self.rows, self.cols), dtype=bool)
        m[self.indices[:, 0], self.indices[:, 1]] = True
        m.setflags(write=False)
        return m

    def __eq__(self, other):
        if not isinstance(other, ObservationSet):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.indices, other.indices)

    def __hash__(self):
        return hash((self.rows, self.cols, self.indices.tobytes()))


def sample_observations(rows, cols, model, seed) -> ObservationSet:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    rng = rng_for(seed)
    total = rows * cols
    if isinstance(model, BernoulliRho):
        if not 0 < model.rho <= 1:
            raise ValueError(f"rho must lie in (0, 1], got {model.rho}")
        mask = rng.random((rows, cols)) < model.rho
        return ObservationSet.from_mask(mask, model, seed)
    if isinstance(model, UniformExactCount):
        if not 0 < model.count <= total:
            raise ValueError(f"count must lie in (0, {total}], got {model.count}")
        flat = rng.choice(total, size=model.count, replace=False)
        idx = np.stack([flat // cols, flat % cols], axis=1)
        return ObservationSet(rows, cols, idx, model, seed)
    raise ValueError(f"unknown sampling model {model!r}")


def _check(m, omega):
    a = as_matrix(m)
    if a.shape != omega.shape:
        raise ValueError(f"matrix shape {a.shape} does not match observation set {omega.shape}")
    return a


def project_omega(m, omega: ObservationSet) -> np.ndarray:
    a = _check(m, omega)
    return np.where(omega.mask, a, 0.0)


def project_omega_complement(m, omega: ObservationSet) -> np.ndarray:
    a = _check(m, omega)
    return np.where(omega.mask, 0.0, a)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Orthonormal basis (m x r) of a column space."""

    basis: np.ndarray

    def __post_init__(self):
        b = as_matrix(self.basis, "basis")
        gram = b.T @ b
        if not np.allclose(gram, np.eye(b.shape[1]), rtol=0, atol=1e-10):
            raise ValueError("basis columns are not orthonormal")
        object.__setattr__(self, "basis", b)

    @classmethod
    def of(cls, m) -> SubspaceBasis:
        """Orthonormal basis of the column space of ``m`` via its thin SVD."""
        return cls(thin_svd(m).u)

    @property
    def rank(self) -> int:
        return int(self.basis.shape[1])


def project_column_space(m, u: SubspaceBasis) -> np.ndarray:
    """``U U^T M``."""
    a = as_matrix(m)
    if a.shape[0] != u.basis.shape[0]:
        raise ValueError("row count of matrix and basis differ")
    return u.basis @ (u.basis.T @ a)
