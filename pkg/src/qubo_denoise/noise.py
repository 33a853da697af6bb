"""Salt-and-pepper noise: every bit flipped independently with probability sigma.

All randomness uses :class:`numpy.random.Generator` backed by PCG64, whose
bitstream is fixed across platforms for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .core import as_bit_matrix, as_bits


def check_sigma(sigma: float, name: str = "sigma") -> float:
    sigma = float(sigma)
    if not 0.0 <= sigma <= 0.5:
        raise ValueError(f"{name} must lie in [0, 0.5], got {sigma}")
    return sigma


@dataclass(frozen=True)
class NoiseSpec:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        check_sigma(self.sigma)

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)


def apply_noise(x, spec: NoiseSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Return ``(x + eps) mod 2`` with ``eps_i ~ Bernoulli(sigma)`` i.i.d.

    If ``rng`` is omitted a generator is seeded from ``spec.seed``.
    """
    x = as_bits(x)
    if rng is None:
        rng = spec.rng()
    flips = rng.random(x.shape[0]) < spec.sigma
    return x ^ flips.astype(np.uint8)


def apply_noise_batch(X, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Row-wise :func:`apply_noise` drawing from one generator."""
    X = as_bit_matrix(X)
    check_sigma(sigma)
    return X ^ (rng.random(X.shape) < sigma).astype(np.uint8)


class SaltAndPepperNoise(TransformerMixin, BaseEstimator):
    """Transformer that corrupts binary rows with salt-and-pepper noise.

    Handy for building ``noise -> denoiser`` pipelines in experiments. Each
    call to :meth:`transform` advances a generator created at ``fit`` time,
    so repeated calls give different (but reproducible) noise.
    """

    def __init__(self, sigma=0.1, random_state=0):
        self.sigma = sigma
        self.random_state = random_state

    def fit(self, X=None, y=None):
        check_sigma(self.sigma)
        self.rng_ = np.random.default_rng(self.random_state)
        return self

    def transform(self, X):
        if not hasattr(self, "rng_"):
            self.fit()
        return apply_noise_batch(X, self.sigma, self.rng_)
