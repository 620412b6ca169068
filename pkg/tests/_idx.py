import struct
from pathlib import Path

import numpy as np


def idx_bytes(magic: int, dims: tuple[int, ...], payload: bytes) -> bytes:
    return struct.pack(f">I{len(dims)}I", magic, *dims) + payload


def write_idx_pair(
    directory: Path, images: np.ndarray, labels: np.ndarray
) -> tuple[Path, Path]:
    """Write uint8 ``images`` (n, rows, cols) and ``labels`` (n,) as IDX files."""
    images_path = directory / "images.idx3-ubyte"
    labels_path = directory / "labels.idx1-ubyte"
    images_path.write_bytes(idx_bytes(0x803, images.shape, images.astype(np.uint8).tobytes()))
    labels_path.write_bytes(idx_bytes(0x801, labels.shape, labels.astype(np.uint8).tobytes()))
    return images_path, labels_path
