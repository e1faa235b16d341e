"""Eigenvalues of symmetric tridiagonal matrices by Sturm-sequence bisection."""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def count_below(diag, off2, x):
    """Number of eigenvalues strictly below ``x`` (``off2`` holds squared off-diagonals)."""
    count = 0
    q = diag[0] - x
    if q < 0.0:
        count += 1
    for i in range(1, diag.shape[0]):
        if q == 0.0:
            q = 1e-300
        q = diag[i] - x - off2[i - 1] / q
        if q < 0.0:
            count += 1
    return count


@njit(cache=True)
def gershgorin(diag, off):
    n = diag.shape[0]
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(off[i - 1])
        if i < n - 1:
            r += abs(off[i])
        lo = min(lo, diag[i] - r)
        hi = max(hi, diag[i] + r)
    return lo, hi


@njit(cache=True)
def lowest_eigenvalues(diag, off, k, rtol):
    """The ``k`` smallest eigenvalues, each bisected to relative width ``rtol``."""
    off2 = off * off
    lo0, hi0 = gershgorin(diag, off)
    out = np.empty(k)
    for j in range(k):
        lo = lo0 if j == 0 else out[j - 1]
        hi = hi0
        while hi - lo > rtol * max(abs(lo), abs(hi), 1e-300):
            mid = 0.5 * (lo + hi)
            if count_below(diag, off2, mid) > j:
                hi = mid
            else:
                lo = mid
        out[j] = 0.5 * (lo + hi)
    return out


def tridiagonal_eigenvalues(diag: np.ndarray, off: np.ndarray, k: int, rtol: float = 1e-14) -> np.ndarray:
    diag = np.ascontiguousarray(diag, dtype=np.float64)
    off = np.ascontiguousarray(off, dtype=np.float64)
    if k > diag.shape[0]:
        raise ValueError("k exceeds the matrix size")
    return lowest_eigenvalues(diag, off, int(k), float(rtol))
