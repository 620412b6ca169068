import logging
import math
import struct
from pathlib import Path

import numpy as np

from ._error import (
    IdxCountMismatchError,
    IdxFormatError,
    IdxMagicError,
    IdxTruncatedError,
    ParameterError,
)
from ._numerics import Rng, gaussian_sample, uniform_sample
from ._types import Dataset, Matrix, MixtureSpec, NoiseKind

_LOGGER = logging.getLogger(__package__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
IDX_CLASSES = 10

DEFAULT_RING_MODES = 8
DEFAULT_RING_RADIUS = 2.0
DEFAULT_MODE_SIGMA = 0.02


def _uniform_weights(k: int) -> np.ndarray:
    return np.full(k, 1.0 / k)


def ring_mixture(
    k: int = DEFAULT_RING_MODES,
    radius: float = DEFAULT_RING_RADIUS,
    sigma: float = DEFAULT_MODE_SIGMA,
) -> MixtureSpec:
    """``k`` equally weighted modes evenly spaced on a circle, the first at (radius, 0)."""
    if k < 1:
        raise ParameterError(f"need at least one mode, got {k}")
    if radius < 0:
        raise ParameterError(f"radius must be non-negative, got {radius}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    angles = 2.0 * math.pi * np.arange(k) / k
    centers = radius * np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return MixtureSpec(centers=centers, sigma=sigma, weights=_uniform_weights(k))


def grid_mixture(
    size: int = 5, spacing: float = 2.0, sigma: float = DEFAULT_MODE_SIGMA
) -> MixtureSpec:
    """``size×size`` equally weighted modes on a square grid centred at the origin."""
    if size < 1:
        raise ParameterError(f"grid size must be positive, got {size}")
    if spacing < 0:
        raise ParameterError(f"spacing must be non-negative, got {spacing}")
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    ticks = (np.arange(size) - (size - 1) / 2.0) * spacing
    xs, ys = np.meshgrid(ticks, ticks, indexing="ij")
    centers = np.stack([xs.ravel(), ys.ravel()], axis=1)
    return MixtureSpec(centers=centers, sigma=sigma, weights=_uniform_weights(size * size))


def sample_mixture(spec: MixtureSpec, n: int, rng: Rng) -> Dataset:
    """Draw mode indices by weight, then isotropic noise around each chosen center."""
    if n < 1:
        raise ParameterError(f"sample count must be positive, got {n}")
    labels = rng.categorical(spec.weights, n)
    noise = gaussian_sample(rng, n, spec.dim, 0.0, spec.sigma)
    return Dataset(samples=spec.centers[labels] + noise, labels=labels)


def noise_batch(rng: Rng, n: int, dim: int, kind: NoiseKind = "gaussian") -> Matrix:
    if n < 1 or dim < 1:
        raise ParameterError(f"noise batch dimensions must be positive, got {n}x{dim}")
    match kind:
        case "gaussian":
            return gaussian_sample(rng, n, dim, 0.0, 1.0)
        case "uniform":
            return uniform_sample(rng, n, dim, -1.0, 1.0)
        case _:
            raise ParameterError(f"unknown noise kind {kind!r}")


def _read_idx(path: Path, magic: int, ndim: int) -> tuple[tuple[int, ...], bytes]:
    # Layout (big endian): u32 magic | u32 dim[ndim] | u8 payload
    data = path.read_bytes()
    header_len = 4 + 4 * ndim
    if len(data) < 4:
        raise IdxTruncatedError(f"{path}: file too short for an IDX magic number")
    (found,) = struct.unpack(">I", data[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic number 0x{found:08x}, expected 0x{magic:08x}")
    if len(data) < header_len:
        raise IdxTruncatedError(f"{path}: header truncated")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    if any(d == 0 for d in dims):
        raise IdxFormatError(f"{path}: zero-sized dimension in {dims}")
    expected = math.prod(dims)
    payload = data[header_len:]
    if len(payload) < expected:
        raise IdxTruncatedError(f"{path}: {len(payload)} payload bytes, expected {expected}")
    if len(payload) > expected:
        raise IdxFormatError(f"{path}: {len(payload) - expected} trailing bytes")
    return dims, payload


def load_idx(images_path: str | Path, labels_path: str | Path) -> Dataset:
    """Load an IDX image/label pair, flattening images row-major into [-1, 1]."""
    images_path, labels_path = Path(images_path), Path(labels_path)
    (count, rows, cols), pixels = _read_idx(images_path, IDX_IMAGES_MAGIC, 3)
    (n_labels,), label_bytes = _read_idx(labels_path, IDX_LABELS_MAGIC, 1)
    if n_labels != count:
        raise IdxCountMismatchError(f"{count} images but {n_labels} labels")
    raw = np.frombuffer(pixels, dtype=np.uint8).reshape(count, rows * cols)
    samples = raw.astype(np.float64) / 127.5 - 1.0
    labels = np.frombuffer(label_bytes, dtype=np.uint8).astype(np.int64)
    if labels.max() >= IDX_CLASSES:
        raise IdxFormatError(
            f"{labels_path}: label {int(labels.max())} outside 0..{IDX_CLASSES - 1}"
        )
    _LOGGER.info("loaded %d images of %dx%d from %s", count, rows, cols, images_path)
    return Dataset(samples=samples, labels=labels)


def image_shape(images_path: str | Path) -> tuple[int, int]:
    """(rows, cols) of an IDX image file, read from its header."""
    path = Path(images_path)
    with open(path, "rb") as f:
        header = f.read(16)
    if len(header) < 16:
        raise IdxTruncatedError(f"{path}: header truncated")
    magic, _, rows, cols = struct.unpack(">4I", header)
    if magic != IDX_IMAGES_MAGIC:
        raise IdxMagicError(f"{path}: magic number 0x{magic:08x}")
    return rows, cols
