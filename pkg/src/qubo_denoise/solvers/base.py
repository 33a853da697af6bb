from __future__ import annotations

from abc import ABC, abstractmethod
from typing import List, Tuple

import numpy as np

from ..core import QuboMatrix, as_bits, qubo_energy


class SolverError(RuntimeError):
    """A QUBO backend failed to produce a solution."""


def seed_sequence(seed, default: int = 0) -> np.random.SeedSequence:
    """Normalize a seed; ``None`` maps to ``default`` so runs stay reproducible."""
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(default if seed is None else seed)


def single_flip_delta(q: QuboMatrix, x, i: int) -> float:
    """Energy change ``f(x with bit i flipped) - f(x)``, computed in O(n)."""
    x = as_bits(x, q.n)
    i = int(i)
    if not 0 <= i < q.n:
        raise IndexError(f"index {i} out of range for n={q.n}")
    row = q.entries[i]
    off = float(row @ x) - row[i] * x[i]
    gain = row[i] + 2.0 * off
    return gain if x[i] == 0 else -gain


class QuboSolver(ABC):
    """Common interface of all QUBO minimization backends.

    Subclasses implement :meth:`_solve`; :meth:`solve` validates the input
    and recomputes the energy of the returned state so backends are never
    trusted on that point.
    """

    #: largest supported problem size, ``None`` for unbounded
    max_n: int | None = None
    #: whether repeated calls with different seeds can return different states
    stochastic: bool = True

    @property
    def default_seed(self) -> int:
        return 0

    @abstractmethod
    def _solve(self, q: QuboMatrix, seed: np.random.SeedSequence) -> np.ndarray:
        ...

    def _check_size(self, q: QuboMatrix):
        if self.max_n is not None and q.n > self.max_n:
            raise ValueError(
                f"{type(self).__name__} supports n <= {self.max_n}, got n={q.n}")

    def solve(self, q: QuboMatrix, seed=None) -> Tuple[np.ndarray, float]:
        self._check_size(q)
        x = as_bits(self._solve(q, seed_sequence(seed, self.default_seed)), q.n,
                    name="solution")
        return x, qubo_energy(q, x)

    def sample(self, q: QuboMatrix, num_reads: int, seed=None) -> List[Tuple[np.ndarray, float]]:
        """``num_reads`` independent reads with seeds spawned from ``seed``.

        Deterministic backends are solved once and the result repeated.
        """
        if num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        if not self.stochastic:
            x, e = self.solve(q, seed)
            return [(x.copy(), e) for _ in range(num_reads)]
        reads = []
        for r, child in enumerate(seed_sequence(seed, self.default_seed).spawn(num_reads)):
            try:
                reads.append(self.solve(q, child))
            except SolverError as exc:
                raise SolverError(f"read {r}: {exc}") from exc
        return reads
