import logging
import math
import os
from pathlib import Path

import numpy as np
import pytest

from lcnn_gan_lab import (
    IdxCountMismatchError,
    IdxFormatError,
    IdxMagicError,
    IdxTruncatedError,
    ParameterError,
    Rng,
    grid_mixture,
    image_shape,
    load_idx,
    noise_batch,
    ring_mixture,
    sample_mixture,
)

from ._idx import idx_bytes, write_idx_pair

logging.basicConfig(level=logging.INFO, format="%(name)s (%(levelname)s): %(message)s")
logging.getLogger("lcnn_gan_lab").setLevel(10)


def test_ring_mixture_geometry():
    spec = ring_mixture(8, 2.0, 0.02)
    assert spec.n_modes == 8
    assert spec.dim == 2
    np.testing.assert_allclose(spec.centers[0], [2.0, 0.0])
    np.testing.assert_allclose(spec.centers[2], [0.0, 2.0], atol=1e-15)
    np.testing.assert_allclose(np.linalg.norm(spec.centers, axis=1), 2.0)
    np.testing.assert_allclose(spec.weights, 1 / 8)


def test_ring_mixture_rejects_bad_parameters():
    with pytest.raises(ParameterError):
        ring_mixture(0)
    with pytest.raises(ParameterError):
        ring_mixture(8, -1.0)
    with pytest.raises(ParameterError):
        ring_mixture(8, 2.0, 0.0)


def test_grid_mixture_geometry():
    spec = grid_mixture(5, 2.0, 0.05)
    assert spec.n_modes == 25
    np.testing.assert_allclose(spec.centers.mean(axis=0), [0.0, 0.0], atol=1e-12)
    assert spec.centers.min() == -4.0 and spec.centers.max() == 4.0
    assert len({tuple(c) for c in spec.centers}) == 25


def test_sample_mixture_stays_near_centers():
    spec = ring_mixture(8, 2.0, 0.02)
    data = sample_mixture(spec, 4000, Rng(0))
    assert data.samples.shape == (4000, 2)
    assert data.labels is not None
    offsets = data.samples - spec.centers[data.labels]
    assert np.abs(offsets).max() < 6 * 0.02
    assert offsets.std() == pytest.approx(0.02, rel=0.05)
    counts = np.bincount(data.labels, minlength=8)
    assert counts.min() > 400


def test_sample_mixture_is_deterministic():
    spec = ring_mixture()
    a = sample_mixture(spec, 50, Rng(4))
    b = sample_mixture(spec, 50, Rng(4))
    np.testing.assert_array_equal(a.samples, b.samples)
    with pytest.raises(ParameterError):
        sample_mixture(spec, 0, Rng(4))


def test_noise_batch():
    g = noise_batch(Rng(1), 100, 3)
    assert g.shape == (100, 3)
    u = noise_batch(Rng(1), 100, 3, "uniform")
    assert u.min() >= -1.0 and u.max() < 1.0
    with pytest.raises(ParameterError):
        noise_batch(Rng(1), 0, 3)
    with pytest.raises(ParameterError):
        noise_batch(Rng(1), 1, 3, "laplace")


def test_load_idx_scales_pixels(tmp_path):
    images = np.array([[[0, 255], [128, 64]], [[255, 255], [0, 0]], [[1, 2], [3, 4]]])
    images_path, labels_path = write_idx_pair(tmp_path, images, np.array([7, 0, 3]))
    data = load_idx(images_path, labels_path)
    assert data.samples.shape == (3, 4)
    np.testing.assert_allclose(data.samples[0], [-1.0, 1.0, 128 / 127.5 - 1, 64 / 127.5 - 1])
    np.testing.assert_array_equal(data.labels, [7, 0, 3])
    assert data.samples.min() >= -1.0 and data.samples.max() <= 1.0
    assert image_shape(images_path) == (2, 2)


def test_load_idx_count_mismatch(tmp_path):
    images_path, labels_path = write_idx_pair(
        tmp_path, np.zeros((3, 2, 2)), np.array([1, 2])
    )
    with pytest.raises(IdxCountMismatchError):
        load_idx(images_path, labels_path)


def test_load_idx_header_errors(tmp_path):
    images_path, labels_path = write_idx_pair(tmp_path, np.zeros((2, 2, 2)), np.array([1, 2]))
    good = images_path.read_bytes()

    images_path.write_bytes(idx_bytes(0x801, (2, 2, 2), bytes(8)))
    with pytest.raises(IdxMagicError):
        load_idx(images_path, labels_path)

    images_path.write_bytes(good[:10])
    with pytest.raises(IdxTruncatedError):
        load_idx(images_path, labels_path)

    images_path.write_bytes(good[:-1])
    with pytest.raises(IdxTruncatedError):
        load_idx(images_path, labels_path)

    images_path.write_bytes(good + b"\x00")
    with pytest.raises(IdxFormatError):
        load_idx(images_path, labels_path)

    images_path.write_bytes(idx_bytes(0x803, (0, 2, 2), b""))
    with pytest.raises(IdxFormatError):
        load_idx(images_path, labels_path)


def test_load_idx_rejects_out_of_range_labels(tmp_path):
    images_path, labels_path = write_idx_pair(tmp_path, np.zeros((2, 2, 2)), np.array([0, 12]))
    with pytest.raises(IdxFormatError, match="label 12"):
        load_idx(images_path, labels_path)


def test_corrupted_headers_never_load(tmp_path):
    images_path, labels_path = write_idx_pair(tmp_path, np.zeros((2, 3, 3)), np.array([0, 1]))
    good = images_path.read_bytes()
    rng = Rng(2024)
    for trial in range(200):
        corrupted = bytearray(good)
        position = int(rng.integers(16, 1)[0])
        corrupted[position] ^= 1 + int(rng.integers(255, 1)[0])
        cut = int(rng.integers(len(good) + 1, 1)[0]) if trial % 4 == 0 else len(good)
        images_path.write_bytes(bytes(corrupted[:cut]))
        # any header change breaks the magic, the dimensions or the payload length
        with pytest.raises(IdxFormatError):
            load_idx(images_path, labels_path)


@pytest.mark.skipif("MNIST_DIR" not in os.environ, reason="MNIST_DIR not set")
def test_mnist_training_set():
    root = Path(os.environ["MNIST_DIR"])
    data = load_idx(root / "train-images-idx3-ubyte", root / "train-labels-idx1-ubyte")
    assert len(data) == 60000
    assert data.dim == 784
    assert data.n_classes == 10
    assert math.isclose(float(data.samples.min()), -1.0)
