"""Heterogeneous Euclidean-overlap metric (HEOM)."""
from __future__ import annotations

import numpy as np


def heom(A: np.ndarray, B: np.ndarray, categorical: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Pairwise HEOM distances between the rows of ``A`` and ``B``.

    Numeric attributes contribute ``|a - b| / (max - min)`` (span taken as 1
    when zero or undefined), categorical attributes 0/1 overlap, and any
    missing cell contributes 1.
    """
    A = np.atleast_2d(A)
    B = np.atleast_2d(B)
    span = hi - lo
    span = np.where(span > 0, span, 1.0)
    d2 = np.zeros((A.shape[0], B.shape[0]))
    for j in range(A.shape[1]):
        a = A[:, j][:, None]
        b = B[:, j][None, :]
        if categorical[j]:
            dj = (a != b).astype(float)
        else:
            with np.errstate(invalid="ignore"):
                dj = np.abs(a - b) / span[j]
        dj = np.where(np.isnan(a) | np.isnan(b), 1.0, dj)
        d2 += dj * dj
    return np.sqrt(d2)


def neighbor_order(dist: np.ndarray) -> np.ndarray:
    """Column indices of each row sorted by (distance, index)."""
    return np.argsort(dist, axis=1, kind="stable")
