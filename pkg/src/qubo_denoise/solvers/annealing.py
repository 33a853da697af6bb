from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import QuboMatrix, qubo_energy
from ._kernels import anneal
from .base import QuboSolver, seed_sequence


@dataclass(frozen=True)
class SaConfig:
    """Simulated-annealing settings.

    ``restarts`` counts chains in addition to the first one, so the total
    number of independent chains is ``restarts + 1``.
    """

    sweeps: int = 1000
    beta_start: float = 0.1
    beta_end: float = 10.0
    restarts: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.sweeps < 0:
            raise ValueError("sweeps must be >= 0")
        if not 0 < self.beta_start <= self.beta_end:
            raise ValueError("need 0 < beta_start <= beta_end")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")

    def betas(self) -> np.ndarray:
        if self.sweeps == 0:
            return np.zeros(0)
        if self.sweeps == 1:
            return np.array([self.beta_start])
        return np.geomspace(self.beta_start, self.beta_end, self.sweeps)


def _run_chain(Q, betas, rng):
    n = Q.shape[0]
    x0 = rng.integers(0, 2, size=n, dtype=np.uint8)
    m = betas.shape[0] * n
    idx = rng.integers(0, n, size=m)
    u = rng.random(m)
    return anneal(Q, x0, betas, idx, u)


def anneal_restarts(q: QuboMatrix, cfg: SaConfig, seed=None):
    """Run every chain and return ``(best_state, energy, per_chain_energies)``.

    The lowest recomputed energy wins; ties go to the lowest chain index.
    """
    Q = np.ascontiguousarray(q.entries)
    betas = cfg.betas()
    ss = seed_sequence(seed, cfg.seed)
    best, best_e, energies = None, np.inf, []
    for child in ss.spawn(cfg.restarts + 1):
        x, _ = _run_chain(Q, betas, np.random.default_rng(child))
        e = qubo_energy(q, x)
        energies.append(e)
        if e < best_e:
            best, best_e = x, e
    return best, best_e, energies


def solve_sa(q: QuboMatrix, cfg: SaConfig = SaConfig()):
    """Simulated annealing; returns the best state seen and its exact energy."""
    return SimulatedAnnealingSolver(cfg).solve(q, cfg.seed)


class SimulatedAnnealingSolver(QuboSolver):
    """Metropolis single-bit-flip annealing with a geometric beta schedule."""

    stochastic = True

    def __init__(self, config: SaConfig = SaConfig()):
        self.config = config

    @property
    def default_seed(self) -> int:
        return self.config.seed

    def _solve(self, q, seed):
        return anneal_restarts(q, self.config, seed)[0]

    def __repr__(self):
        return f"SimulatedAnnealingSolver({self.config!r})"
