"""Separable bicubic resampling weights (Keys kernel, a = -0.5).

Both upsampling and anti-aliased downsampling are expressed as explicit 1-D
weight matrices, so the resulting operators are exactly linear and their
adjoints are plain transposes. Output pixel j of an axis resized by ratio
``out/in`` samples the input at coordinate (j + 0.5) * in/out - 0.5
(pixel-center alignment); out-of-range taps are clamped to the edge.
"""

from __future__ import annotations

import numpy as np

KEYS_A = -0.5


def keys_kernel(x: np.ndarray, a: float = KEYS_A) -> np.ndarray:
    """Cubic convolution kernel of Keys; support (-2, 2), partition of unity."""
    ax = np.abs(np.asarray(x, dtype=np.float64))
    out = np.zeros_like(ax)
    inner = ax <= 1.0
    outer = (ax > 1.0) & (ax < 2.0)
    out[inner] = (a + 2.0) * ax[inner] ** 3 - (a + 3.0) * ax[inner] ** 2 + 1.0
    out[outer] = a * (ax[outer] ** 3 - 5.0 * ax[outer] ** 2 + 8.0 * ax[outer] - 4.0)
    return out


def upsample_matrix(n: int, factor: int) -> np.ndarray:
    """(factor*n, n) bicubic interpolation matrix for one axis."""
    if factor < 1:
        raise ValueError(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        return np.eye(n)
    m = factor * n
    w = np.zeros((m, n))
    for j in range(m):
        s = (j + 0.5) / factor - 0.5
        base = int(np.floor(s))
        for tap in range(base - 1, base + 3):
            w[j, min(max(tap, 0), n - 1)] += keys_kernel(s - tap)
    return w


def downsample_matrix(n: int, factor: int) -> np.ndarray:
    """(n//factor, n) anti-aliased bicubic reduction matrix for one axis.

    The kernel is dilated by the factor (support 4*factor taps) and each
    output row is renormalized to sum 1.
    """
    if factor < 1:
        raise ValueError(f"downsample factor must be >= 1, got {factor}")
    if n % factor != 0:
        raise ValueError(f"axis length {n} not divisible by factor {factor}")
    if factor == 1:
        return np.eye(n)
    m = n // factor
    w = np.zeros((m, n))
    for i in range(m):
        s = (i + 0.5) * factor - 0.5
        lo = int(np.floor(s - 2.0 * factor)) + 1
        hi = int(np.ceil(s + 2.0 * factor))
        for tap in range(lo, hi):
            w[i, min(max(tap, 0), n - 1)] += keys_kernel((s - tap) / factor)
        w[i] /= w[i].sum()
    return w


def apply_separable(wr: np.ndarray, wc: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Apply per-axis weight matrices to an (H, W, C) array: wr @ x @ wc.T."""
    out = np.tensordot(wr, x, axes=(1, 0))
    return np.tensordot(wc, out, axes=(1, 1)).transpose(1, 0, 2)
