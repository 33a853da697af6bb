"""Binary vectors, binary images and dense QUBO matrices.

Bit vectors are plain 1-D ``numpy.uint8`` arrays holding only 0/1 values;
:func:`as_bits` is the validation gate every other module goes through.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Tuple

import numpy as np


def as_bits(x, n: int | None = None, name: str = "x") -> np.ndarray:
    """Validate ``x`` as a 0/1 vector and return it as a fresh uint8 array.

    Parameters
    ----------
    x : array-like
        Values that must all be exactly 0 or 1.
    n : int, optional
        Required length.
    name : str
        Used in error messages.
    """
    arr = np.asarray(x)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError(f"{name} must have length >= 1")
    if arr.dtype == bool:
        arr = arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0/1 entries")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {n}")
    return arr.astype(np.uint8, copy=True)


def as_bit_matrix(X, n_features: int | None = None, name: str = "X") -> np.ndarray:
    """2-D analogue of :func:`as_bits`: one bit vector per row."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {arr.shape}")
    if not np.all((arr == 0) | (arr == 1)):
        raise ValueError(f"{name} must contain only 0/1 entries")
    if n_features is not None and arr.shape[1] != n_features:
        raise ValueError(
            f"{name} has {arr.shape[1]} features, expected {n_features}")
    return arr.astype(np.uint8, copy=True)


@dataclass(frozen=True)
class BinaryImage:
    """A ``height x width`` binary image stored row-major as a bit vector."""

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        px = as_bits(self.pixels, self.width * self.height, name="pixels")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_array(cls, arr) -> "BinaryImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
        h, w = arr.shape
        return cls(w, h, arr.reshape(-1))

    def to_array(self) -> np.ndarray:
        return self.pixels.reshape(self.height, self.width).copy()

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return (self.width == other.width and self.height == other.height
                and np.array_equal(self.pixels, other.pixels))

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))


class QuboMatrix:
    """Symmetric real matrix defining ``f(x) = sum_ij Q_ij x_i x_j``.

    The energy is the full double sum, so an off-diagonal coupling between
    ``i`` and ``j`` contributes ``2 * Q_ij`` when both bits are set. Use
    :meth:`from_terms` when starting from polynomial coefficients
    (``c * x_i x_j`` for ``i < j``); it halves off-diagonals accordingly.

    Instances are immutable: the underlying array is read-only.
    """

    __slots__ = ("_q",)

    def __init__(self, entries, *, symmetrize: bool = False, atol: float = 1e-12):
        q = np.array(entries, dtype=np.float64)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise ValueError(f"QUBO matrix must be square and non-empty, got {q.shape}")
        if not np.all(np.isfinite(q)):
            raise ValueError("QUBO matrix entries must be finite")
        if symmetrize:
            q = 0.5 * (q + q.T)
        elif not np.allclose(q, q.T, rtol=0.0, atol=atol):
            raise ValueError("QUBO matrix must be symmetric (pass symmetrize=True)")
        else:
            q = 0.5 * (q + q.T)
        q.flags.writeable = False
        self._q = q

    @classmethod
    def from_terms(cls, n: int, terms: Iterable[Tuple[int, int, float]]) -> "QuboMatrix":
        """Build from ``(i, j, c)`` polynomial terms, ``c * x_i * x_j``.

        Repeated pairs accumulate; ``(i, j)`` and ``(j, i)`` are the same term.
        """
        q = np.zeros((n, n))
        for i, j, c in terms:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise IndexError(f"term ({i}, {j}) out of range for n={n}")
            if i == j:
                q[i, i] += c
            else:
                q[i, j] += 0.5 * c
                q[j, i] += 0.5 * c
        return cls(q)

    def to_terms(self):
        """Upper-triangular polynomial terms; inverse of :meth:`from_terms`."""
        n = self.n
        iu, ju = np.triu_indices(n)
        vals = self._q[iu, ju] * np.where(iu == ju, 1.0, 2.0)
        return [(int(i), int(j), float(c)) for i, j, c in zip(iu, ju, vals) if c != 0.0]

    @property
    def n(self) -> int:
        return self._q.shape[0]

    @property
    def entries(self) -> np.ndarray:
        return self._q

    def __array__(self, dtype=None, copy=None):
        return self._q if dtype is None else self._q.astype(dtype)

    def __eq__(self, other):
        if not isinstance(other, QuboMatrix):
            return NotImplemented
        return np.array_equal(self._q, other._q)

    def __hash__(self):
        return hash(self._q.tobytes())

    def __repr__(self):
        return f"QuboMatrix(n={self.n})"


def qubo_energy(q: QuboMatrix, x) -> float:
    """Evaluate ``sum_ij Q_ij x_i x_j``."""
    x = as_bits(x, q.n).astype(np.float64)
    return float(x @ q.entries @ x)


def qubo_energies(q: QuboMatrix, X) -> np.ndarray:
    """Row-wise :func:`qubo_energy` for a batch of states."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != q.n:
        raise ValueError(f"expected states of shape (m, {q.n}), got {X.shape}")
    return np.einsum("ij,jk,ik->i", X, q.entries, X)


def hamming(a, b) -> int:
    a = as_bits(a, name="a")
    b = as_bits(b, name="b")
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} != {b.shape[0]}")
    return int(np.count_nonzero(a != b))


def overlap(a, b) -> float:
    """Spin overlap ``mean((2a - 1)(2b - 1))``, in [-1, 1]."""
    a = as_bits(a, name="a").astype(np.int64)
    b = as_bits(b, name="b").astype(np.int64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape[0]} != {b.shape[0]}")
    return float(np.mean((2 * a - 1) * (2 * b - 1)))


def all_states(n: int) -> np.ndarray:
    """Every 0/1 vector of length ``n`` in lexicographic order (x_0 most significant)."""
    if n > 24:
        raise ValueError(f"refusing to enumerate 2^{n} states")
    idx = np.arange(2 ** n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((idx[:, None] >> shifts) & 1).astype(np.uint8)
