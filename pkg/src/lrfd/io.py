"""Plain-text matrix and mask files.

Matrix file::

    rows,cols
    a00,a01,...
    ...

Values are written with 17 significant digits, enough for an exact
float64 round trip.

Mask file::

    rows,cols,count
    i,j
    ...

with 0-based indices sorted row-major.
"""
from __future__ import annotations

import numpy as np

from .linalg import as_matrix
from .observation import ObservationSet


class FormatError(ValueError):
    pass


def _header(line, n, path):
    try:
        vals = [int(tok) for tok in line.strip().split(",")]
    except ValueError:
        raise FormatError(f"{path}: malformed header {line.strip()!r}") from None
    if len(vals) != n:
        raise FormatError(f"{path}: header must have {n} fields")
    return vals


def write_matrix(path, m) -> None:
    a = as_matrix(m)
    with open(path, "w") as fh:
        fh.write(f"{a.shape[0]},{a.shape[1]}\n")
        for row in a:
            fh.write(",".join(format(float(x), ".17g") for x in row))
            fh.write("\n")


def read_matrix(path) -> np.ndarray:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    rows, cols = _header(lines[0], 2, path)
    body = lines[1:]
    if len(body) != rows:
        raise FormatError(f"{path}: expected {rows} rows, found {len(body)}")
    try:
        data = np.array([[float(tok) for tok in ln.split(",")] for ln in body])
    except ValueError:
        raise FormatError(f"{path}: non-numeric entry") from None
    if data.shape != (rows, cols):
        raise FormatError(f"{path}: expected {cols} columns per row")
    return as_matrix(data)


def write_mask(path, omega: ObservationSet) -> None:
    with open(path, "w") as fh:
        fh.write(f"{omega.rows},{omega.cols},{omega.count}\n")
        for i, j in omega.indices:
            fh.write(f"{i},{j}\n")


def read_mask(path) -> ObservationSet:
    with open(path) as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: empty file")
    rows, cols, count = _header(lines[0], 3, path)
    if len(lines) - 1 != count:
        raise FormatError(f"{path}: header says {count} indices, found {len(lines) - 1}")
    try:
        idx = np.array([[int(tok) for tok in ln.split(",")] for ln in lines[1:]],
                       dtype=np.int64).reshape(-1, 2)
    except ValueError:
        raise FormatError(f"{path}: malformed index line") from None
    omega = ObservationSet(rows, cols, idx)
    if omega.count != count:
        raise FormatError(f"{path}: duplicate indices")
    return omega
