"""Procedural toy image galleries for desk-scale experiments.

Images mix smooth random fields with simple geometric content (blobs,
gradients, stripes, checkers) so that different gallery members stay
distinguishable even under heavy masking or coarse downsampling. All values
lie in [0.05, 0.95].
"""

from __future__ import annotations

import os

import numpy as np

from .core import load_image, rng_from_seed


def _smooth_field(rng: np.random.Generator, n: int, cutoff: float) -> np.ndarray:
    """Low-pass-filtered white noise on an n x n grid."""
    noise = rng.standard_normal((n, n))
    spec = np.fft.fft2(noise)
    fy = np.fft.fftfreq(n)[:, None]
    fx = np.fft.fftfreq(n)[None, :]
    spec *= np.exp(-((fy**2 + fx**2) / (2.0 * cutoff**2)))
    return np.fft.ifft2(spec).real


def _blob(rng: np.random.Generator, n: int) -> np.ndarray:
    yy, xx = np.mgrid[0:n, 0:n] / n
    img = np.zeros((n, n))
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0.1, 0.9, size=2)
        s = rng.uniform(0.06, 0.25)
        amp = rng.uniform(0.4, 1.0) * rng.choice([-1.0, 1.0])
        img += amp * np.exp(-((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * s**2))
    return img


def _stripes(rng: np.random.Generator, n: int) -> np.ndarray:
    yy, xx = np.mgrid[0:n, 0:n] / n
    theta = rng.uniform(0, np.pi)
    freq = rng.uniform(1.5, 5.0)
    phase = rng.uniform(0, 2 * np.pi)
    return np.sin(2 * np.pi * freq * (np.cos(theta) * xx + np.sin(theta) * yy) + phase)


def _checker(rng: np.random.Generator, n: int) -> np.ndarray:
    period = int(rng.integers(max(2, n // 8), max(3, n // 3)))
    yy, xx = np.mgrid[0:n, 0:n]
    return (((yy // period) + (xx // period)) % 2).astype(np.float64) * 2.0 - 1.0


def _normalize(img: np.ndarray) -> np.ndarray:
    lo, hi = img.min(), img.max()
    if hi - lo < 1e-12:
        return np.full_like(img, 0.5)
    return 0.05 + 0.9 * (img - lo) / (hi - lo)


def make_toy_gallery(n_images: int, size: int, channels: int, seed) -> np.ndarray:
    """(n_images, size, size, channels) gallery in [0.05, 0.95]."""
    rng = rng_from_seed(seed)
    patterns = (_blob, _stripes, _checker)
    out = np.empty((n_images, size, size, channels))
    for i in range(n_images):
        base = _smooth_field(rng, size, cutoff=rng.uniform(0.05, 0.15))
        extra = patterns[int(rng.integers(len(patterns)))](rng, size)
        plane = _normalize(2.0 * base + rng.uniform(0.3, 1.0) * extra)
        for c in range(channels):
            if c == 0:
                out[i, :, :, c] = plane
            else:
                tint = _normalize(plane + 0.5 * _smooth_field(rng, size, 0.1))
                out[i, :, :, c] = tint
    return out


def load_gallery_folder(path: str, max_images: int | None = None) -> np.ndarray:
    """Load a folder of same-shaped PNG/PPM/PGM images as a gallery array."""
    names = sorted(
        f for f in os.listdir(path)
        if os.path.splitext(f)[1].lower() in (".png", ".ppm", ".pgm", ".pnm")
    )
    if max_images is not None:
        names = names[:max_images]
    if not names:
        raise ValueError(f"no raster images found in {path!r}")
    images = [load_image(os.path.join(path, f)) for f in names]
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise ValueError(f"gallery images disagree on shape: {sorted(shapes)}")
    return np.stack(images)
