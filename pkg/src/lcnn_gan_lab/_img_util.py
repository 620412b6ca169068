import csv
import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image

from ._data import noise_batch
from ._error import ParameterError, ShapeError
from ._nn import Network, forward
from ._numerics import Rng
from ._types import Matrix, NoiseKind

_LOGGER = logging.getLogger(__package__)

# generator outputs at least this wide and square are treated as images
_MIN_IMAGE_PIXELS = 16


def to_pixels(values: Matrix) -> np.ndarray:
    """Map [-1, 1] to 0..255 (values outside are clamped, halves round to even)."""
    return np.rint((np.clip(values, -1.0, 1.0) + 1.0) * 127.5).astype(np.uint8)


def tile_images(images: Matrix, rows: int, cols: int, shape: tuple[int, int]) -> np.ndarray:
    """Lay ``rows·cols`` flattened images out row by row into one 8-bit grid."""
    h, w = shape
    if images.shape != (rows * cols, h * w):
        raise ShapeError(f"{images.shape} does not hold {rows}x{cols} images of {h}x{w}")
    tiles = to_pixels(images).reshape(rows, cols, h, w)
    return tiles.transpose(0, 2, 1, 3).reshape(rows * h, cols * w)


def write_pgm(grid: np.ndarray, path: str | Path) -> None:
    """Binary PGM: ``P5\\n<width> <height>\\n255\\n`` followed by row-major bytes."""
    with Image.fromarray(grid) as image:
        image.save(path, format="PPM")
    _LOGGER.info("exporting image to %s", path)


def write_scatter(points: Matrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(points.shape[1])])
        for row in points:
            writer.writerow([repr(float(v)) for v in row])
    _LOGGER.info("exporting scatter samples to %s", path)


def _square_shape(dim: int) -> tuple[int, int] | None:
    side = math.isqrt(dim)
    if side * side == dim and dim >= _MIN_IMAGE_PIXELS:
        return side, side
    return None


def emit_sample_grid(
    g: Network,
    rng: Rng,
    rows: int,
    cols: int,
    path: str | Path,
    *,
    image_shape: tuple[int, int] | None = None,
    noise_kind: NoiseKind = "gaussian",
) -> Path:
    """Render ``rows·cols`` generator samples.

    Image-shaped outputs become a PGM grid at ``path``; other outputs (the 2-D
    mixtures) become a scatter CSV with the same stem.  Returns the written path.
    """
    if rows < 1 or cols < 1:
        raise ParameterError(f"grid must be at least 1x1, got {rows}x{cols}")
    samples = forward(g, noise_batch(rng, rows * cols, g.in_features, noise_kind)).output
    shape = image_shape or _square_shape(g.out_features)
    path = Path(path)
    if shape is None:
        target = path.with_suffix(".csv")
        write_scatter(samples, target)
        return target
    if shape[0] * shape[1] != g.out_features:
        raise ShapeError(f"image shape {shape} does not fit {g.out_features} outputs")
    target = path.with_suffix(".pgm")
    write_pgm(tile_images(samples, rows, cols, shape), target)
    return target
