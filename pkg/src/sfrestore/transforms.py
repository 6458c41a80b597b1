"""Injective fidelity transforms and the three data-fidelity losses.

Implemented transforms:
  * identity
  * bicubic upsampling by an integer factor (spatial feature extractor)
  * ideal high-pass / low-pass DFT filters with Chebyshev radius r0
    around the centered DC component

The high/low-pass pair uses complementary binary spectral masks, so
highpass(x) + lowpass(x) == x exactly and, by Parseval, the squared norms of
the two filtered residuals sum to the plain residual norm. The low-pass
region is the strict inequality r(u, v) < r0; ties at r == r0 belong to the
high-pass filter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import bicubic
from .core import check_image, fft2, ifft2
from .degradations import ShapeMismatchError, Shape3


def chebyshev_radius_grid(h: int, w: int) -> np.ndarray:
    """r(u, v) = max(|u - cu|, |v - cv|) on the fftshift-centered grid.

    The DC component sits at (h // 2, w // 2) after centering (exact for
    even sizes, floor convention for odd sizes).
    """
    u = np.abs(np.arange(h) - h // 2)
    v = np.abs(np.arange(w) - w // 2)
    return np.maximum(u[:, None], v[None, :])


def lowpass_mask(h: int, w: int, r0: int) -> np.ndarray:
    """Binary centered-spectrum mask: 1 where r(u, v) < r0."""
    if r0 < 0:
        raise ValueError(f"r0 must be >= 0, got {r0}")
    return chebyshev_radius_grid(h, w) < r0


class FidelityTransform:
    """Linear injective map with apply/adjoint; shapes fixed at construction."""

    kind: str
    in_shape: Shape3
    out_shape: Shape3

    def apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _check(self, x: np.ndarray, shape: Shape3) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != shape:
            raise ShapeMismatchError(
                f"{self.kind}: expected shape {shape}, got {x.shape}"
            )
        return x


@dataclass(frozen=True)
class IdentityTransform(FidelityTransform):
    in_shape: Shape3
    kind: str = field(default="identity", init=False)

    @property
    def out_shape(self) -> Shape3:
        return self.in_shape

    def apply(self, x):
        return self._check(x, self.in_shape).copy()

    def adjoint(self, y):
        return self._check(y, self.in_shape).copy()


@dataclass(frozen=True)
class BicubicUpsample(FidelityTransform):
    in_shape: Shape3
    factor: int
    kind: str = field(default="bicubic-upsample", init=False)

    def __post_init__(self):
        if self.factor < 1:
            raise ValueError(f"factor must be >= 1, got {self.factor}")
        h, w, _ = self.in_shape
        object.__setattr__(self, "_wr", bicubic.upsample_matrix(h, self.factor))
        object.__setattr__(self, "_wc", bicubic.upsample_matrix(w, self.factor))

    @property
    def out_shape(self) -> Shape3:
        h, w, c = self.in_shape
        return (h * self.factor, w * self.factor, c)

    def apply(self, x):
        return bicubic.apply_separable(self._wr, self._wc, self._check(x, self.in_shape))

    def adjoint(self, y):
        return bicubic.apply_separable(
            self._wr.T, self._wc.T, self._check(y, self.out_shape)
        )


@dataclass(frozen=True)
class SpectralFilter(FidelityTransform):
    """Ideal DFT filter: center the spectrum, apply a binary mask, invert.

    Orthogonal projection, hence self-adjoint with spectral norm 1 (unless
    the mask is empty or full).
    """

    in_shape: Shape3
    r0: int
    band: str  # "high" or "low"

    def __post_init__(self):
        if self.band not in ("high", "low"):
            raise ValueError(f"band must be 'high' or 'low', got {self.band!r}")
        h, w, _ = self.in_shape
        low = lowpass_mask(h, w, self.r0)
        keep = low if self.band == "low" else ~low
        # decentered so it can be applied to the raw (unshifted) spectrum
        m = np.fft.ifftshift(keep).astype(np.float64)
        m.setflags(write=False)
        object.__setattr__(self, "_mask", m)

    @property
    def kind(self) -> str:
        return f"{self.band}pass"

    @property
    def out_shape(self) -> Shape3:
        return self.in_shape

    def apply(self, x):
        x = self._check(x, self.in_shape)
        return ifft2(fft2(x) * self._mask[:, :, None])

    def adjoint(self, y):
        return self.apply(y)


def make_transform(kind: str, in_shape: Shape3, *, factor: int = 4, r0: int = 0):
    if kind == "identity":
        return IdentityTransform(in_shape=in_shape)
    if kind == "bicubic-upsample":
        return BicubicUpsample(in_shape=in_shape, factor=factor)
    if kind == "highpass":
        return SpectralFilter(in_shape=in_shape, r0=r0, band="high")
    if kind == "lowpass":
        return SpectralFilter(in_shape=in_shape, r0=r0, band="low")
    raise ValueError(f"unknown transform kind {kind!r}")


def bicubic_upsample(x: np.ndarray, r: int) -> np.ndarray:
    """Upsample an (H, W, C) image by integer factor r (r=1 is identity)."""
    x = check_image(x)
    return BicubicUpsample(in_shape=x.shape, factor=r).apply(x)


def ideal_highpass(x: np.ndarray, r0: int) -> np.ndarray:
    """Zero the centered-spectrum entries with r(u, v) < r0."""
    x = np.asarray(x, dtype=np.float64)
    return SpectralFilter(in_shape=x.shape, r0=r0, band="high").apply(x)


def ideal_lowpass(x: np.ndarray, r0: int) -> np.ndarray:
    """Keep only the centered-spectrum entries with r(u, v) < r0."""
    x = np.asarray(x, dtype=np.float64)
    return SpectralFilter(in_shape=x.shape, r0=r0, band="low").apply(x)


def fidelity_losses(
    y: np.ndarray, Ax: np.ndarray, psi_s: FidelityTransform, r0: int
) -> tuple[float, float, float]:
    """(L_s, L_H, L_L): squared residual norms under the three transforms."""
    y = np.asarray(y, dtype=np.float64)
    Ax = np.asarray(Ax, dtype=np.float64)
    if y.shape != Ax.shape:
        raise ShapeMismatchError(f"y shape {y.shape} != Ax shape {Ax.shape}")
    d_s = psi_s.apply(y) - psi_s.apply(Ax)
    d_h = ideal_highpass(y - Ax, r0)
    d_l = ideal_lowpass(y - Ax, r0)
    return (
        float(np.sum(d_s**2)),
        float(np.sum(d_h**2)),
        float(np.sum(d_l**2)),
    )
