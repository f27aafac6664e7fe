"""Compiled lag recursions shared by filtering, the score and simulation."""
from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _ma_filter_impl(rhs, C):
    T, n, m = rhs.shape
    q = C.shape[0]
    z = np.empty_like(rhs)
    for t in range(T):
        for r in range(n):
            for k in range(m):
                z[t, r, k] = rhs[t, r, k]
        for j in range(1, q + 1):
            if t - j < 0:
                break
            for r in range(n):
                for s in range(n):
                    c = C[j - 1, r, s]
                    if c != 0.0:
                        for k in range(m):
                            z[t, r, k] -= c * z[t - j, s, k]
    return z


def lag_filter(rhs: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Solve ``z_t + C_1 z_{t-1} + ... + C_q z_{t-q} = rhs_t`` with zero presample.

    Parameters
    ----------
    rhs : ndarray, shape (T, n) or (T, n, m)
    C : ndarray, shape (q, n, n)

    Returns
    -------
    ndarray with the shape of ``rhs``.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    squeeze = rhs.ndim == 2
    r3 = np.ascontiguousarray(rhs[:, :, None] if squeeze else rhs)
    C = np.ascontiguousarray(C, dtype=np.float64)
    if C.shape[0] == 0:
        z = r3.copy()
    else:
        z = _ma_filter_impl(r3, C)
    return z[:, :, 0] if squeeze else z


def lagged_stack(Y: np.ndarray, d: int) -> np.ndarray:
    """Rows ``(y_{t-1}', ..., y_{t-d}')`` with zero presample, shape (T, n d)."""
    T, n = Y.shape
    X = np.zeros((T, n * d))
    for i in range(1, d + 1):
        X[i:, (i - 1) * n:i * n] = Y[:T - i]
    return X
