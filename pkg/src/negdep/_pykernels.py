"""Vectorised numpy versions of the batch kernels.

Each function mirrors ``_ckernels`` operation for operation so that both
backends return bitwise-identical results.
"""
import math

import numpy as np

NAME = "numpy"


def simes_rows(P):
    """Simes statistic of every row of a 2-D array of p-values."""
    P = np.ascontiguousarray(P, dtype=np.float64)
    n, K = P.shape
    ps = np.sort(P, axis=1)
    ks = np.arange(1, K + 1, dtype=np.float64)
    out = (float(K) * ps / ks).min(axis=1)
    return np.clip(out, 0.0, 1.0)


def bh_rows(P, is_null, alpha):
    """Step-up count and number of false rejections of BH on every row.

    ``is_null`` is either one mask shared by all rows or one mask per row.
    """
    P = np.ascontiguousarray(P, dtype=np.float64)
    n, K = P.shape
    null = np.broadcast_to(np.asarray(is_null, dtype=bool), (n, K))
    order = np.argsort(P, axis=1, kind="stable")
    ps = np.take_along_axis(P, order, axis=1)
    ks = np.arange(1, K + 1, dtype=np.float64)
    ok = float(K) * ps / ks <= alpha
    kstar = np.where(ok.any(axis=1), K - np.argmax(ok[:, ::-1], axis=1), 0)
    cum = np.cumsum(np.take_along_axis(null, order, axis=1), axis=1)
    false = np.where(kstar > 0, cum[np.arange(n), np.maximum(kstar - 1, 0)], 0)
    return kstar.astype(np.int64), false.astype(np.int64)


def esym_rows(E, k):
    """Order-k U-statistic (mean of all k-fold products) of every row."""
    E = np.ascontiguousarray(E, dtype=np.float64)
    n, K = E.shape
    acc = np.zeros((n, k + 1))
    acc[:, 0] = 1.0
    for i in range(K):
        x = E[:, i]
        for j in range(min(i + 1, k), 0, -1):
            acc[:, j] += x * acc[:, j - 1]
    return acc[:, k] / float(math.comb(K, k))
