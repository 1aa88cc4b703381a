"""Numba-jitted implementations of the hot kernels.

Contracts match ``_kernels_numpy``. Results agree with the numpy path to
floating-point reassociation (~1e-14 relative), not bit-for-bit.
"""

import numpy as np
from numba import njit, prange


@njit(cache=True, parallel=True)
def gmm_score(x, means, inv_var, log_norm_w):
    B, d = x.shape
    K = means.shape[0]
    out = np.empty((B, d))
    for b in prange(B):
        logp = np.empty(K)
        mx = -np.inf
        for k in range(K):
            sq = 0.0
            for j in range(d):
                diff = x[b, j] - means[k, j]
                sq += diff * diff
            lp = log_norm_w[k] - 0.5 * inv_var[k] * sq
            logp[k] = lp
            if lp > mx:
                mx = lp
        z = 0.0
        for k in range(K):
            logp[k] = np.exp(logp[k] - mx)
            z += logp[k]
        for j in range(d):
            out[b, j] = 0.0
        for k in range(K):
            c = logp[k] / z * inv_var[k]
            for j in range(d):
                out[b, j] += c * (means[k, j] - x[b, j])
    return out


@njit(cache=True, inline="always")
def _reflect(i, n):
    # symmetric (edge-repeating) boundary index, multi-bounce
    if n == 1:
        return 0
    period = 2 * n
    m = i % period
    if m < 0:
        m += period
    if m >= n:
        m = period - 1 - m
    return m


@njit(cache=True, parallel=True)
def median_filter_2d(img, kernel):
    h, w = img.shape
    out = np.empty((h, w))
    r = kernel // 2
    mid = (kernel * kernel) // 2
    for i in prange(h):
        buf = np.empty(kernel * kernel)
        for j in range(w):
            idx = 0
            for di in range(-r, r + 1):
                ii = _reflect(i + di, h)
                for dj in range(-r, r + 1):
                    jj = _reflect(j + dj, w)
                    buf[idx] = img[ii, jj]
                    idx += 1
            out[i, j] = np.partition(buf, mid)[mid]
    return out
