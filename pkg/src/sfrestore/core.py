"""Array fundamentals: channel-wise 2-D DFT, RNG helpers, raster image I/O.

Images are float64 arrays of shape (H, W, C). Clean images and measurements
live in [0, 1] at I/O boundaries; intermediate sampler states are unbounded.
Spectra are complex128 arrays of the same shape with the DC component at
index (0, 0).

DFT convention: unnormalized forward, 1/(H*W) inverse. Under this convention
Parseval reads  sum|fft2(x)|^2 = H*W * sum|x|^2.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

IMAG_RESIDUE_TOL = 1e-9


def check_image(x: np.ndarray) -> np.ndarray:
    """Validate an (H, W, C) real image array and return it as float64."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"image must have shape (H, W, C), got {x.shape}")
    if x.shape[0] < 1 or x.shape[1] < 1 or x.shape[2] < 1:
        raise ValueError(f"image dimensions must be positive, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("image contains non-finite entries")
    return x


def fft2(img: np.ndarray) -> np.ndarray:
    """Channel-wise 2-D DFT (unnormalized forward) of an (H, W, C) image."""
    img = check_image(img)
    return np.fft.fft2(img, axes=(0, 1))


def ifft2(spec: np.ndarray, imag_tol: float = IMAG_RESIDUE_TOL) -> np.ndarray:
    """Inverse channel-wise 2-D DFT; returns the real part.

    An imaginary residue above ``imag_tol`` (max-abs) signals a
    filter-symmetry bug upstream and raises ValueError.
    """
    spec = np.asarray(spec, dtype=np.complex128)
    if spec.ndim != 3:
        raise ValueError(f"spectrum must have shape (H, W, C), got {spec.shape}")
    out = np.fft.ifft2(spec, axes=(0, 1))
    residue = np.max(np.abs(out.imag)) if out.size else 0.0
    if residue > imag_tol:
        raise ValueError(
            f"imaginary residue {residue:.3e} exceeds {imag_tol:.1e}; "
            "spectrum is not conjugate-symmetric"
        )
    return np.ascontiguousarray(out.real)


def rng_from_seed(seed) -> np.random.Generator:
    """Deterministic Generator from a seed (int or SeedSequence material)."""
    return np.random.default_rng(seed)


def spawn_seed(master_seed: int, index: int) -> np.random.SeedSequence:
    """Independent child seed for batch item ``index`` under a master seed."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(index,))


# ---------------------------------------------------------------------------
# Raster I/O: PNG (via Pillow) and the portable pixmap family (PPM/PGM).
# Values map linearly to [0, 1] on read; on write they are clamped to [0, 1]
# and rounded to the target bit depth.


def to_uint(x: np.ndarray, bit_depth: int) -> np.ndarray:
    maxval = (1 << bit_depth) - 1
    q = np.rint(np.clip(x, 0.0, 1.0) * maxval)
    return q.astype(np.uint8 if bit_depth == 8 else np.uint16)


def save_image(path: str | os.PathLike, img: np.ndarray, bit_depth: int = 8) -> None:
    """Write an (H, W, C) image in [0, 1] to PNG or PPM/PGM."""
    img = check_image(img)
    if bit_depth not in (8, 16):
        raise ValueError("bit_depth must be 8 or 16")
    if img.shape[2] not in (1, 3):
        raise ValueError("only 1- or 3-channel images can be written")
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    q = to_uint(img, bit_depth)
    if ext in (".ppm", ".pgm", ".pnm"):
        _save_pnm(path, q, bit_depth)
    elif ext == ".png":
        _save_png(path, q, bit_depth)
    else:
        raise ValueError(f"unsupported image format: {ext!r}")


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Read a PNG or PPM/PGM file as an (H, W, C) float64 image in [0, 1]."""
    path = os.fspath(path)
    ext = os.path.splitext(path)[1].lower()
    if ext in (".ppm", ".pgm", ".pnm"):
        return _load_pnm(path)
    if ext == ".png":
        return _load_png(path)
    raise ValueError(f"unsupported image format: {ext!r}")


def _save_png(path: str, q: np.ndarray, bit_depth: int) -> None:
    h, w, c = q.shape
    if bit_depth == 8:
        pil = PILImage.fromarray(q[:, :, 0] if c == 1 else q, "L" if c == 1 else "RGB")
    else:
        if c != 1:
            raise ValueError("16-bit PNG output supports grayscale only")
        pil = PILImage.fromarray(q[:, :, 0])  # uint16 plane -> 16-bit grayscale
    pil.save(path, format="PNG")


def _load_png(path: str) -> np.ndarray:
    pil = PILImage.open(path)
    if pil.mode in ("I", "I;16"):
        arr = np.asarray(pil, dtype=np.float64) / 65535.0
    else:
        pil = pil.convert("L") if pil.mode == "L" else pil.convert("RGB")
        arr = np.asarray(pil, dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def _save_pnm(path: str, q: np.ndarray, bit_depth: int) -> None:
    h, w, c = q.shape
    maxval = (1 << bit_depth) - 1
    magic = b"P5" if c == 1 else b"P6"
    payload = q.astype(">u1" if bit_depth == 8 else ">u2").tobytes()
    with open(path, "wb") as f:
        f.write(magic + b"\n%d %d\n%d\n" % (w, h, maxval))
        f.write(payload)


def _load_pnm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    fields: list[bytes] = []
    pos = 0
    # header = magic, width, height, maxval; '#' starts a comment
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace byte after maxval
    magic, w, h, maxval = fields[0], int(fields[1]), int(fields[2]), int(fields[3])
    if magic not in (b"P5", b"P6"):
        raise ValueError(f"unsupported PNM magic {magic!r}")
    c = 1 if magic == b"P5" else 3
    dtype = ">u1" if maxval < 256 else ">u2"
    raw = np.frombuffer(data, dtype=dtype, offset=pos, count=h * w * c)
    return raw.reshape(h, w, c).astype(np.float64) / maxval


# ---------------------------------------------------------------------------
# Hex encoding of float64 arrays, used by the out-of-process score protocol.


def floats_to_hex(x: np.ndarray) -> str:
    return np.ascontiguousarray(x, dtype=">f8").tobytes().hex()


def hex_to_floats(s: str, shape: tuple[int, ...]) -> np.ndarray:
    n = int(np.prod(shape))
    raw = bytes.fromhex(s)
    if len(raw) != 8 * n:
        raise ValueError(f"expected {8 * n} bytes for shape {shape}, got {len(raw)}")
    return np.frombuffer(raw, dtype=">f8").astype(np.float64).reshape(shape)
