"""Pure-numpy implementations of the hot kernels.

Same contracts as ``_kernels_numba``; selected via SDEDIT_BACKEND=numpy or
used automatically when numba is unavailable.
"""

import numpy as np


def gmm_score(x: np.ndarray, means: np.ndarray, inv_var: np.ndarray,
              log_norm_w: np.ndarray) -> np.ndarray:
    """Score of an isotropic Gaussian mixture at a batch of points.

    x: (B, d) evaluation points.
    means: (K, d) component means.
    inv_var: (K,) inverse of each component's (scalar) variance.
    log_norm_w: (K,) log weight plus log normalizer, log w_k - (d/2) log(2 pi s_k^2).

    Returns (B, d) gradient of log sum_k w_k N(x; mu_k, s_k^2 I).
    """
    diff = x[:, None, :] - means[None, :, :]            # (B, K, d)
    sq = np.einsum("bkd,bkd->bk", diff, diff)           # (B, K)
    logp = log_norm_w[None, :] - 0.5 * inv_var[None, :] * sq
    logp -= logp.max(axis=1, keepdims=True)
    g = np.exp(logp)
    g /= g.sum(axis=1, keepdims=True)                   # responsibilities
    coef = g * inv_var[None, :]                         # (B, K)
    return coef @ means - coef.sum(axis=1, keepdims=True) * x


def median_filter_2d(img: np.ndarray, kernel: int) -> np.ndarray:
    """Median filter one 2-D channel with symmetric (edge-repeating) padding."""
    if kernel == 1:
        return img.copy()
    r = kernel // 2
    padded = np.pad(img, r, mode="symmetric")
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel, kernel))
    return np.median(windows, axis=(2, 3))
