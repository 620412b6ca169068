"""Dense linear algebra, seeded random streams and a symmetric eigensolver.

The random stream is SplitMix64 (xorshift-multiply output mixing over a
Weyl sequence).  Each draw ``i`` of a generator with state ``s`` is::

    z = s + i * 0x9E3779B97F4A7C15            (mod 2**64)
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9  (mod 2**64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB  (mod 2**64)
    z = z ^ (z >> 31)

and the state advances by ``n * 0x9E3779B97F4A7C15`` after ``n`` draws.
Uniforms are ``(z >> 11) * 2**-53``; normals use Box-Muller on consecutive
pairs ``(u1, u2)`` as ``sqrt(-2 log(1 - u1)) * (cos 2πu2, sin 2πu2)``.
"""

import logging
import math
from typing import NamedTuple, Self

import numpy as np
import numpy.typing as npt

from ._error import NumericalError, ParameterError, ShapeError
from ._types import Matrix

_LOGGER = logging.getLogger(__package__)

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_TWO_POW_M53 = 2.0**-53

_SYMMETRY_TOL = 1e-9
_JACOBI_MAX_SWEEPS = 60


def _mix64(z: npt.NDArray[np.uint64]) -> npt.NDArray[np.uint64]:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


class Rng:
    """Single-owner deterministic generator; do not share across threads."""

    def __init__(self, seed: int) -> None:
        if not 0 <= seed <= _MASK64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = seed
        self._state = seed

    @property
    def state(self) -> int:
        return self._state

    @classmethod
    def from_state(cls, seed: int, state: int) -> Self:
        rng = cls(seed)
        if not 0 <= state <= _MASK64:
            raise ParameterError(f"rng state out of range: {state}")
        rng._state = state
        return rng

    def derive(self, stream: int) -> "Rng":
        """Independent generator for ``stream``; does not advance this one."""
        start = (self.seed ^ ((stream + 1) * _GAMMA)) & _MASK64
        mixed = _mix64(np.array([start], dtype=np.uint64))
        return Rng(int(mixed[0]))

    def next_u64(self, n: int) -> npt.NDArray[np.uint64]:
        if n < 0:
            raise ParameterError("cannot draw a negative number of values")
        counters = np.arange(1, n + 1, dtype=np.uint64)
        z = np.uint64(self._state) + counters * np.uint64(_GAMMA)
        self._state = (self._state + n * _GAMMA) & _MASK64
        return _mix64(z)

    def uniform(self, n: int) -> npt.NDArray[np.float64]:
        """``n`` draws from [0, 1)."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * _TWO_POW_M53

    def normal(self, n: int) -> npt.NDArray[np.float64]:
        pairs = (n + 1) // 2
        u = self.uniform(2 * pairs).reshape(pairs, 2)
        radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        angle = 2.0 * math.pi * u[:, 1]
        out = np.empty((pairs, 2), dtype=np.float64)
        out[:, 0] = radius * np.cos(angle)
        out[:, 1] = radius * np.sin(angle)
        return out.reshape(-1)[:n]

    def integers(self, high: int, n: int) -> npt.NDArray[np.int64]:
        """``n`` draws uniform on ``0..high-1``."""
        if high < 1:
            raise ParameterError("integer range must be non-empty")
        idx = np.floor(self.uniform(n) * high).astype(np.int64)
        return np.minimum(idx, high - 1)

    def categorical(self, weights: npt.NDArray[np.float64], n: int) -> npt.NDArray[np.int64]:
        cdf = np.cumsum(weights)
        cdf[-1] = 1.0
        idx = np.searchsorted(cdf, self.uniform(n), side="right").astype(np.int64)
        return np.minimum(idx, len(weights) - 1)


def as_matrix(values: npt.ArrayLike, *, name: str = "matrix") -> Matrix:
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {m.shape}")
    return m


def ensure_finite(m: npt.NDArray[np.float64], what: str) -> None:
    if not np.all(np.isfinite(m)):
        raise NumericalError(f"non-finite values in {what}")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    a = as_matrix(a, name="left operand")
    b = as_matrix(b, name="right operand")
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    out = a @ b
    ensure_finite(out, "matmul result")
    return out


def gaussian_sample(rng: Rng, rows: int, cols: int, mean: float, stdev: float) -> Matrix:
    if stdev < 0:
        raise ParameterError(f"stdev must be non-negative, got {stdev}")
    if rows < 1 or cols < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return mean + stdev * rng.normal(rows * cols).reshape(rows, cols)


def uniform_sample(rng: Rng, rows: int, cols: int, low: float, high: float) -> Matrix:
    if not high >= low:
        raise ParameterError(f"empty interval [{low}, {high}]")
    if rows < 1 or cols < 1:
        raise ParameterError(f"matrix dimensions must be positive, got {rows}x{cols}")
    return low + (high - low) * rng.uniform(rows * cols).reshape(rows, cols)


class EigenDecomposition(NamedTuple):
    eigenvalues: npt.NDArray[np.float64]
    eigenvectors: Matrix


def _round_robin_pairs(n: int) -> list[tuple[npt.NDArray[np.intp], npt.NDArray[np.intp]]]:
    # Tournament schedule: every index pair meets once per sweep, pairs within a
    # round are disjoint so their rotations commute.
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p_idx, q_idx = [], []
        for i in range(m // 2):
            p, q = players[i], players[m - 1 - i]
            if p >= n or q >= n:
                continue
            p_idx.append(min(p, q))
            q_idx.append(max(p, q))
        rounds.append((np.array(p_idx, dtype=np.intp), np.array(q_idx, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def sym_eig(s: Matrix) -> EigenDecomposition:
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Eigenvalues are returned in descending order, eigenvectors as the columns
    of an orthonormal matrix; each column's largest-magnitude entry is made
    positive so results are deterministic.
    """
    s = as_matrix(s, name="symmetric input")
    n = s.shape[0]
    if s.shape[1] != n:
        raise ShapeError(f"eigensolver needs a square matrix, got {s.shape}")
    ensure_finite(s, "eigensolver input")
    scale = max(1.0, float(np.abs(s).max(initial=0.0)))
    if not np.allclose(s, s.T, rtol=0.0, atol=_SYMMETRY_TOL * scale):
        raise ShapeError("eigensolver input is not symmetric")

    a = 0.5 * (s + s.T)
    v = np.eye(n)
    rounds = _round_robin_pairs(n)
    frobenius = float(np.linalg.norm(a))
    for sweep in range(_JACOBI_MAX_SWEEPS):
        off = float(np.linalg.norm(a - np.diag(np.diag(a))))
        if off <= 1e-14 * frobenius:
            _LOGGER.debug("jacobi converged after %d sweeps (n=%d)", sweep, n)
            break
        for p, q in rounds:
            if len(p) == 0:
                continue
            apq = a[p, q]
            rotate = apq != 0.0
            if not np.any(rotate):
                continue
            safe = np.where(rotate, apq, 1.0)
            with np.errstate(over="ignore"):
                theta = (a[q, q] - a[p, p]) / (2.0 * safe)
                t = np.where(theta >= 0.0, 1.0, -1.0) / (
                    np.abs(theta) + np.sqrt(theta * theta + 1.0)
                )
            t = np.where(rotate, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c

            ap, aq = a[:, p], a[:, q]
            a[:, p] = c * ap - sn * aq
            a[:, q] = sn * ap + c * aq
            ap, aq = a[p, :], a[q, :]
            a[p, :] = c[:, None] * ap - sn[:, None] * aq
            a[q, :] = sn[:, None] * ap + c[:, None] * aq
            a[p, q] = 0.0
            a[q, p] = 0.0

            vp, vq = v[:, p], v[:, q]
            v[:, p] = c * vp - sn * vq
            v[:, q] = sn * vp + c * vq
    else:
        _LOGGER.warning("jacobi eigensolver hit the sweep limit (n=%d)", n)

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = v[:, order]
    pivots = np.argmax(np.abs(vectors), axis=0)
    signs = np.where(vectors[pivots, np.arange(n)] < 0, -1.0, 1.0)
    vectors = vectors * signs
    ensure_finite(values, "eigenvalues")
    return EigenDecomposition(values, vectors)
