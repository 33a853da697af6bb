from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..core import QuboMatrix, all_states
from .base import QuboSolver

MAX_N = 24
_CHUNK_BITS = 16


@lru_cache(maxsize=32)
def _states(n: int) -> np.ndarray:
    s = all_states(n).astype(np.float64)
    s.flags.writeable = False
    return s


def _tie_tol(q: np.ndarray) -> float:
    return 1e-10 * max(1.0, float(np.abs(q).sum()))


def exhaustive_minimize(q: QuboMatrix):
    """Global minimizer by enumeration; returns ``(bits, energy, state_index)``.

    Energies within a tiny tolerance of the minimum count as ties, and ties
    go to the lexicographically smallest vector (``x_0`` most significant),
    which is also the lowest state index.
    """
    n = q.n
    if n > MAX_N:
        raise ValueError(f"exhaustive search supports n <= {MAX_N}, got n={n}")
    Q = q.entries
    tol = _tie_tol(Q)
    low = min(n, _CHUNK_BITS)
    tail = _states(low)
    tail_e = np.einsum("ij,jk,ik->i", tail, Q[n - low:, n - low:], tail)
    best_e, best_idx = np.inf, -1
    n_high = n - low
    high_states = _states(n_high) if n_high else np.zeros((1, 0))
    for h, head in enumerate(high_states):
        # f(head, tail) = f(head) + 2 head^T Q_ht tail + f(tail)
        head_e = head @ Q[:n_high, :n_high] @ head
        cross = 2.0 * (tail @ (Q[n - low:, :n_high] @ head))
        e = head_e + cross + tail_e
        m = e.min()
        if m < best_e - tol:
            best_e = float(m)
            best_idx = h * tail.shape[0] + int(np.flatnonzero(e <= m + tol)[0])
    bits = ((best_idx >> np.arange(n - 1, -1, -1)) & 1).astype(np.uint8)
    return bits, best_e, best_idx


def solve_exhaustive(q: QuboMatrix):
    """Exact minimizer ``(bits, energy)`` with lexicographic tie-break."""
    return ExhaustiveSolver().solve(q)


class ExhaustiveSolver(QuboSolver):
    """Brute-force enumeration of all ``2^n`` states (``n <= 24``)."""

    max_n = MAX_N
    stochastic = False

    def _solve(self, q, seed):
        return exhaustive_minimize(q)[0]
