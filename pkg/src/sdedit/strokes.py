"""Guide construction: simulated stroke paintings and edit masks.

A stroke painting is simulated from a photo by median-filtering (washing out
texture) and then reducing the palette with seeded k-means, mimicking the
flat color patches of a quick human stroke sketch. The published recipe uses
kernel 23 and 6 colors at 256x256; the kernel rescales with image height to
preserve the receptive fraction at desk resolutions.
"""

from __future__ import annotations

import numpy as np

from . import _backend
from .errors import DomainError, ShapeMismatchError
from .sampler import EditMask

__all__ = [
    "Palette",
    "median_filter",
    "quantize_adaptive",
    "simulate_stroke",
    "default_stroke_kernel",
    "mask_from_edit",
]


class Palette:
    """Up to 256 distinct colors, each a channel tuple in [0, 1]."""

    def __init__(self, colors: np.ndarray):
        colors = np.atleast_2d(np.asarray(colors, dtype=np.float64))
        if not (1 <= colors.shape[0] <= 256):
            raise DomainError(f"palette size must be 1..256, got {colors.shape[0]}")
        if len(np.unique(colors, axis=0)) != colors.shape[0]:
            raise DomainError("palette colors must be distinct")
        self.colors = colors

    def __len__(self) -> int:
        return self.colors.shape[0]


def _channels_last(img: np.ndarray) -> tuple[np.ndarray, bool]:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return img[:, :, None], True
    if img.ndim == 3 and img.shape[2] in (1, 3):
        return img, False
    raise ShapeMismatchError(f"image must be (H, W) or (H, W, 1|3), got {img.shape}")


def median_filter(img: np.ndarray, kernel: int) -> np.ndarray:
    """Per-channel median over a kernel x kernel window, reflecting at borders."""
    if kernel < 1 or kernel % 2 == 0:
        raise DomainError(f"kernel must be odd and >= 1, got {kernel}")
    arr, squeeze = _channels_last(img)
    out = np.empty_like(arr)
    for c in range(arr.shape[2]):
        out[:, :, c] = _backend.median_filter_2d(np.ascontiguousarray(arr[:, :, c]), kernel)
    return out[:, :, 0] if squeeze else out


def _kmeans_pp_init(pixels: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = np.empty((k, pixels.shape[1]))
    centers[0] = pixels[rng.integers(pixels.shape[0])]
    d2 = np.sum((pixels - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            centers[j:] = centers[0]
            break
        centers[j] = pixels[rng.choice(pixels.shape[0], p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pixels - centers[j]) ** 2, axis=1))
    return centers


def _assign(pixels: np.ndarray, centers: np.ndarray) -> np.ndarray:
    # argmin breaks exact ties toward the lowest cluster index
    d2 = (np.sum(pixels**2, axis=1)[:, None]
          - 2.0 * pixels @ centers.T
          + np.sum(centers**2, axis=1)[None, :])
    return np.argmin(d2, axis=1)


def quantize_adaptive(img: np.ndarray, k: int, seed: int = 0,
                      n_iter: int = 25) -> tuple[np.ndarray, Palette]:
    """Reduce to at most k colors by seeded k-means++ in channel space.

    Deterministic for a fixed seed: k-means++ initialization followed by
    ``n_iter`` Lloyd iterations (stopping early once assignments freeze).
    If the image already has <= k distinct colors it is returned unchanged
    with its own palette.
    """
    if not (1 <= k <= 256):
        raise DomainError(f"k must be 1..256, got {k}")
    arr, squeeze = _channels_last(img)
    h, w, c = arr.shape
    pixels = arr.reshape(-1, c)
    distinct = np.unique(pixels, axis=0)
    if distinct.shape[0] <= k:
        out = arr.copy()
        return (out[:, :, 0] if squeeze else out), Palette(distinct)

    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(pixels, k, rng)
    labels = _assign(pixels, centers)
    for _ in range(n_iter):
        for j in range(k):
            sel = labels == j
            if np.any(sel):
                centers[j] = pixels[sel].mean(axis=0)
            # empty cluster keeps its previous center
        new_labels = _assign(pixels, centers)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels

    quantized = centers[labels].reshape(h, w, c)
    used = np.unique(centers[np.unique(labels)], axis=0)
    return (quantized[:, :, 0] if squeeze else quantized), Palette(used)


def default_stroke_kernel(height: int) -> int:
    """Nearest odd integer to 23 * H / 256, floored at 3."""
    v = 23.0 * height / 256.0
    k = 2 * int(round((v - 1.0) / 2.0)) + 1
    return max(k, 3)


def simulate_stroke(img: np.ndarray, kernel: int | None = None, k: int = 6,
                    seed: int = 0) -> np.ndarray:
    """Simulate a human stroke painting: median filter, then adaptive palette."""
    if kernel is None:
        kernel = default_stroke_kernel(np.asarray(img).shape[0])
    blurred = median_filter(img, kernel)
    quantized, _ = quantize_adaptive(blurred, k, seed)
    return quantized


def mask_from_edit(original: np.ndarray, edited: np.ndarray,
                   threshold: float = 0.0) -> EditMask:
    """Editable-region mask: 1 wherever any channel moved by more than threshold."""
    a, _ = _channels_last(original)
    b, _ = _channels_last(edited)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"shape mismatch: {a.shape} vs {b.shape}")
    changed = np.any(np.abs(a - b) > threshold, axis=2)
    orig = np.asarray(original)
    if orig.ndim == 3:
        omega = np.repeat(changed[:, :, None], orig.shape[2], axis=2).astype(np.float64)
        return EditMask(omega.ravel(), orig.shape)
    return EditMask(changed.astype(np.float64).ravel(), orig.shape)
