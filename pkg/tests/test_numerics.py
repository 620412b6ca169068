import logging

import numpy as np
import pytest

from lcnn_gan_lab import (
    NumericalError,
    ParameterError,
    Rng,
    ShapeError,
    gaussian_sample,
    matmul,
    sym_eig,
    uniform_sample,
)

logging.basicConfig(level=logging.INFO, format="%(name)s (%(levelname)s): %(message)s")
logging.getLogger("lcnn_gan_lab").setLevel(10)


def _random_symmetric(n: int, seed: int) -> np.ndarray:
    a = np.random.default_rng(seed).standard_normal((n, n))
    return a + a.T


def test_splitmix_reference_values():
    rng = Rng(0)
    assert [int(v) for v in rng.next_u64(3)] == [
        0xE220A8397B1DCDAF,
        0x6E789E6AA1B965F4,
        0x06C45D188009454F,
    ]


def test_draws_do_not_depend_on_batching():
    a = Rng(1234)
    b = Rng(1234)
    whole = a.next_u64(10)
    parts = np.concatenate([b.next_u64(3), b.next_u64(7)])
    np.testing.assert_array_equal(whole, parts)
    assert a.state == b.state


def test_resume_from_state():
    rng = Rng(99)
    rng.normal(17)
    resumed = Rng.from_state(rng.seed, rng.state)
    np.testing.assert_array_equal(rng.uniform(50), resumed.uniform(50))


def test_derive_does_not_advance_parent():
    rng = Rng(7)
    state = rng.state
    child_a = rng.derive(0)
    child_b = rng.derive(1)
    assert rng.state == state
    assert child_a.seed != child_b.seed
    np.testing.assert_array_equal(rng.derive(0).next_u64(4), child_a.next_u64(4))


def test_invalid_seed():
    with pytest.raises(ParameterError):
        Rng(-1)
    with pytest.raises(ParameterError):
        Rng(2**64)


def test_uniform_and_normal_moments():
    rng = Rng(5)
    u = rng.uniform(20000)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert u.mean() == pytest.approx(0.5, abs=0.01)
    z = rng.normal(20001)
    assert z.shape == (20001,)
    assert z.mean() == pytest.approx(0.0, abs=0.03)
    assert z.std() == pytest.approx(1.0, abs=0.03)


def test_integers_and_categorical():
    rng = Rng(3)
    ints = rng.integers(5, 1000)
    assert ints.min() >= 0 and ints.max() <= 4
    assert set(ints.tolist()) == {0, 1, 2, 3, 4}
    np.testing.assert_array_equal(rng.categorical(np.array([0.0, 1.0, 0.0]), 50), 1)


def test_gaussian_sample():
    rng = Rng(11)
    x = gaussian_sample(rng, 400, 3, 2.0, 0.5)
    assert x.shape == (400, 3)
    assert x.mean() == pytest.approx(2.0, abs=0.1)
    np.testing.assert_array_equal(gaussian_sample(rng, 2, 2, 1.5, 0.0), np.full((2, 2), 1.5))
    with pytest.raises(ParameterError):
        gaussian_sample(rng, 2, 2, 0.0, -1.0)


def test_uniform_sample_bounds():
    x = uniform_sample(Rng(2), 100, 4, -1.0, 1.0)
    assert x.min() >= -1.0 and x.max() < 1.0
    with pytest.raises(ParameterError):
        uniform_sample(Rng(2), 1, 1, 1.0, 0.0)


def test_matmul():
    a = np.arange(6.0).reshape(2, 3)
    b = np.arange(12.0).reshape(3, 4)
    np.testing.assert_array_equal(matmul(a, b), a @ b)
    with pytest.raises(ShapeError):
        matmul(a, a)
    with pytest.raises(NumericalError):
        matmul(np.array([[1e308, 1e308]]), np.array([[1e308], [1e308]]))


@pytest.mark.parametrize("n", [1, 2, 5, 8, 17])
def test_sym_eig_matches_reference(n):
    s = _random_symmetric(n, seed=n)
    values, vectors = sym_eig(s)
    np.testing.assert_allclose(values, np.sort(np.linalg.eigvalsh(s))[::-1], atol=1e-10)
    np.testing.assert_allclose(vectors.T @ vectors, np.eye(n), atol=1e-10)
    np.testing.assert_allclose(vectors @ np.diag(values) @ vectors.T, s, atol=1e-9)
    assert np.all(np.diff(values) <= 1e-12)


def test_sym_eig_sign_convention():
    _, vectors = sym_eig(_random_symmetric(6, seed=42))
    pivots = np.argmax(np.abs(vectors), axis=0)
    assert np.all(vectors[pivots, np.arange(6)] > 0)


def test_sym_eig_diagonal_and_zero():
    values, vectors = sym_eig(np.diag([1.0, 3.0, 2.0]))
    np.testing.assert_array_equal(values, [3.0, 2.0, 1.0])
    np.testing.assert_array_equal(np.abs(vectors), np.eye(3)[:, [1, 2, 0]])
    values, _ = sym_eig(np.zeros((4, 4)))
    np.testing.assert_array_equal(values, np.zeros(4))


def test_sym_eig_rejects_bad_input():
    with pytest.raises(ShapeError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ShapeError):
        sym_eig(np.ones((2, 3)))
    with pytest.raises(NumericalError):
        sym_eig(np.array([[np.nan, 0.0], [0.0, 1.0]]))
