"""Compiled inner loops for vertex scoring.

Both kernels signal a non positive definite block by returning NaN in the
log-determinant slot instead of raising, so callers can map it to
:class:`~permdag.errors.NotPositiveDefinite`.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _chol_inverse(M, idx):
    """Cholesky log-determinant and inverse of ``M[idx][:, idx]``."""
    m = idx.size
    C = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1):
            acc = M[idx[a], idx[b]]
            for c in range(b):
                acc -= C[a, c] * C[b, c]
            if a == b:
                if not acc > 0.0:
                    return math.nan, C
                C[a, a] = math.sqrt(acc)
            else:
                C[a, b] = acc / C[b, b]
    ell = 0.0
    for a in range(m):
        ell += 2.0 * math.log(C[a, a])
    # inverse of the lower factor, then Minv = Ci^T Ci
    Ci = np.zeros((m, m))
    for a in range(m):
        Ci[a, a] = 1.0 / C[a, a]
        for b in range(a):
            acc = 0.0
            for c in range(b, a):
                acc -= C[a, c] * Ci[c, b]
            Ci[a, b] = acc / C[a, a]
    Minv = np.zeros((m, m))
    for a in range(m):
        for b in range(a + 1):
            acc = 0.0
            for c in range(a, m):
                acc += Ci[c, a] * Ci[c, b]
            Minv[a, b] = acc
            Minv[b, a] = acc
    return ell, Minv


@njit(cache=True)
def ell_logs(M, i, pa):
    """``(logdet M[pa, pa], log M_{i|pa})``; NaN first entry if not PD."""
    ell, Minv = _chol_inverse(M, pa)
    if math.isnan(ell):
        return math.nan, math.nan
    m = pa.size
    s = M[i, i]
    for a in range(m):
        acc = 0.0
        for b in range(m):
            acc += Minv[a, b] * M[pa[b], i]
        s -= M[pa[a], i] * acc
    if not s > 0.0:
        return math.nan, math.nan
    return ell, math.log(s)


@njit(cache=True)
def toggle_terms(M, i, pa):
    """Parent-block log-determinant and log conditional variance of vertex ``i``.

    Returns the current pair and, for every candidate ``k = i+1..p-1``, the
    pair after toggling ``k`` in or out of ``pa``.
    """
    p = M.shape[0]
    m = pa.size
    ncand = p - i - 1
    ell = np.empty(ncand)
    logs = np.empty(ncand)
    ell0, Minv = _chol_inverse(M, pa)
    if math.isnan(ell0):
        return math.nan, math.nan, ell, logs
    b = np.zeros(m)
    for a in range(m):
        for c in range(m):
            b[a] += Minv[a, c] * M[pa[c], i]
    s0 = M[i, i]
    for a in range(m):
        s0 -= M[pa[a], i] * b[a]
    if not s0 > 0.0:
        return math.nan, math.nan, ell, logs
    logs0 = math.log(s0)
    pos = 0
    bk = np.zeros(m)
    for c in range(ncand):
        k = i + 1 + c
        if pos < m and pa[pos] == k:
            minv = Minv[pos, pos]
            ell[c] = ell0 + math.log(minv)
            logs[c] = logs0 + math.log(minv + b[pos] * b[pos] / s0) - math.log(minv)
            pos += 1
            continue
        for a in range(m):
            acc = 0.0
            for d in range(m):
                acc += Minv[a, d] * M[pa[d], k]
            bk[a] = acc
        rkk = M[k, k]
        rki = M[k, i]
        for a in range(m):
            rkk -= M[pa[a], k] * bk[a]
            rki -= M[pa[a], i] * bk[a]
        ell[c] = ell0 + math.log(rkk)
        logs[c] = math.log(s0 - rki * rki / rkk)
    return ell0, logs0, ell, logs
