"""Penalty-augmented QUBO denoising.

A noisy visible vector ``x~`` is denoised by minimizing

    f_Q(x) + rho * sum_{i visible} (x_i - x~_i)^2,

which equals the QUBO ``f_{Q~}(x)`` with ``Q~_ii = Q_ii + rho (1 - 2 x~_i)`` on
visible indices, up to the constant ``rho * sum_i x~_i``. With
``rho = log((1 - sigma) / sigma)`` this is the MAP estimate under
salt-and-pepper noise of level ``sigma``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import QuboMatrix, all_states, as_bit_matrix, as_bits, qubo_energies
from .rbm import RbmParams, TrainConfig, rbm_to_qubo, train_cd
from .solvers import QuboSolver, SaConfig, make_solver
from .solvers.base import seed_sequence


def optimal_rho(sigma: float) -> float:
    """Penalty ``log((1 - sigma) / sigma)`` matched to noise level ``sigma``."""
    sigma = float(sigma)
    if not 0.0 < sigma < 0.5:
        raise ValueError(f"sigma must lie in (0, 0.5), got {sigma}")
    return float(np.log1p(-sigma) - np.log(sigma))


def robust_rho(sigma_guess: float, bias_factor: float = 0.75) -> float:
    """:func:`optimal_rho` evaluated at the deliberately shrunk ``bias_factor * sigma_guess``.

    A factor below one raises the penalty, so pixels only flip when the
    model is fairly confident.
    """
    if not bias_factor > 0:
        raise ValueError(f"bias_factor must be positive, got {bias_factor}")
    scaled = bias_factor * float(sigma_guess)
    if not 0.0 < scaled < 0.5:
        raise ValueError(
            f"need 0 < bias_factor * sigma < 0.5, got {bias_factor} * {sigma_guess}")
    return optimal_rho(scaled)


def build_denoise_qubo(q: QuboMatrix, noisy, rho: float) -> QuboMatrix:
    """Shift the visible diagonal of ``q`` by ``rho * (1 - 2 * noisy)``.

    ``noisy`` covers the first ``len(noisy)`` indices of ``q``; the rest
    (hidden units) are left untouched.
    """
    if not rho > 0:
        raise ValueError(f"rho must be positive, got {rho}")
    noisy = np.asarray(noisy)
    if noisy.ndim != 1 or noisy.size > q.n:
        raise ValueError(f"noisy vector of length {noisy.size} does not fit n={q.n}")
    noisy = as_bits(noisy, name="noisy")
    qt = np.array(q.entries)
    v = noisy.size
    qt[np.arange(v), np.arange(v)] += rho * (1.0 - 2.0 * noisy)
    return QuboMatrix(qt)


def penalized_objective(q: QuboMatrix, noisy, rho: float, X) -> np.ndarray:
    """Direct evaluation of ``f_Q(x) + rho * sum_i (x_i - noisy_i)^2`` for rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    noisy = as_bits(noisy).astype(np.float64)
    v = noisy.size
    return qubo_energies(q, X) + rho * ((X[:, :v] - noisy) ** 2).sum(axis=1)


def exact_averaged_solution(q: QuboMatrix, noisy, rho: float) -> np.ndarray:
    """Threshold the exact Boltzmann marginals of ``Q~`` at one half.

    This is the read-averaged estimate in the limit of infinitely many
    samples at unit temperature; enumeration limits it to small ``n``.
    Returns the full ``n``-vector (visible and hidden).
    """
    qt = build_denoise_qubo(q, noisy, rho)
    states = all_states(qt.n).astype(np.float64)
    e = qubo_energies(qt, states)
    w = np.exp(-(e - e.min()))
    marg = (w @ states) / w.sum()
    return (marg > 0.5).astype(np.uint8)


@dataclass(frozen=True)
class DenoiseConfig:
    """How to pick the penalty and how many solver reads to average.

    The penalty is ``rho_override`` if given, otherwise
    ``robust_rho(sigma_estimate, bias_factor)``.
    """

    sigma_estimate: Optional[float] = None
    bias_factor: float = 0.75
    rho_override: Optional[float] = None
    num_reads: int = 100
    threshold: float = field(default=0.5, init=False)

    def __post_init__(self):
        if self.num_reads < 1:
            raise ValueError("num_reads must be >= 1")
        if self.rho_override is None:
            if self.sigma_estimate is None:
                raise ValueError("need sigma_estimate or rho_override")
            self.rho()
        elif not self.rho_override > 0:
            raise ValueError("rho_override must be positive")

    def rho(self) -> float:
        if self.rho_override is not None:
            return float(self.rho_override)
        return robust_rho(self.sigma_estimate, self.bias_factor)


@dataclass
class DenoiseResult:
    denoised_visible: np.ndarray
    per_pixel_mean: np.ndarray
    reads: List[Tuple[np.ndarray, float]]
    rho_used: float
    hidden_mean: np.ndarray | None = None


def denoise_qubo(q: QuboMatrix, noisy, rho: float, solver: QuboSolver,
                 num_reads: int = 1, seed=0) -> DenoiseResult:
    """Solve the penalized QUBO ``num_reads`` times and threshold the visible means.

    A pixel is 1 only if its mean over reads is strictly above 0.5.
    """
    noisy = as_bits(noisy, name="noisy")
    v = noisy.size
    qt = build_denoise_qubo(q, noisy, rho)
    reads = solver.sample(qt, num_reads, seed)
    states = np.stack([x for x, _ in reads]).astype(np.float64)
    mean = states[:, :v].mean(axis=0)
    hidden = states[:, v:].mean(axis=0) if q.n > v else None
    return DenoiseResult((mean > 0.5).astype(np.uint8), mean, reads, float(rho), hidden)


def denoise(p: RbmParams, noisy, cfg: DenoiseConfig, solver: QuboSolver, seed=0) -> DenoiseResult:
    """Denoise one visible vector with a trained RBM; hidden units are solved jointly."""
    noisy = as_bits(noisy, p.num_visible, name="noisy")
    return denoise_qubo(rbm_to_qubo(p), noisy, cfg.rho(), solver, cfg.num_reads, seed)


class QuboDenoiser(TransformerMixin, BaseEstimator):
    """RBM + penalized-QUBO denoiser for binary rows (flattened images).

    ``fit`` trains the RBM on clean rows by contrastive divergence;
    ``transform`` denoises noisy rows.

    Parameters
    ----------
    n_hidden : int, default=50
    sigma : float, default=0.1
        Noise level (or a guess of it) used to set the penalty.
    bias_factor : float, default=0.75
        Multiplier applied to ``sigma`` before computing the penalty.
    rho : float or None, default=None
        Explicit penalty; overrides ``sigma``/``bias_factor``.
    num_reads : int, default=100
    solver : {"sa", "exhaustive", "remote"} or QuboSolver, default="sa"
    sa_sweeps, sa_beta_start, sa_beta_end, sa_restarts
        Annealing schedule when ``solver="sa"``.
    endpoint : str or None
        URL for ``solver="remote"``.
    learning_rate, n_epochs, batch_size, cd_steps
        Contrastive-divergence settings.
    random_state : int, default=0
    n_jobs : int, default=1
        Rows denoised concurrently; ``None`` or ``-1`` uses every core.
        Results do not depend on it.

    Attributes
    ----------
    params_ : RbmParams
    n_features_in_ : int
    """

    def __init__(self, n_hidden=50, sigma=0.1, bias_factor=0.75, rho=None, num_reads=100,
                 solver="sa", sa_sweeps=1000, sa_beta_start=0.1, sa_beta_end=10.0,
                 sa_restarts=0, endpoint=None, learning_rate=0.05, n_epochs=50,
                 batch_size=64, cd_steps=1, random_state=0, n_jobs=1):
        self.n_hidden = n_hidden
        self.sigma = sigma
        self.bias_factor = bias_factor
        self.rho = rho
        self.num_reads = num_reads
        self.solver = solver
        self.sa_sweeps = sa_sweeps
        self.sa_beta_start = sa_beta_start
        self.sa_beta_end = sa_beta_end
        self.sa_restarts = sa_restarts
        self.endpoint = endpoint
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.cd_steps = cd_steps
        self.random_state = random_state
        self.n_jobs = n_jobs

    @classmethod
    def from_params(cls, params: RbmParams, **kwargs) -> "QuboDenoiser":
        """Wrap an already trained RBM; no call to :meth:`fit` needed."""
        est = cls(n_hidden=params.num_hidden, **kwargs)
        est.params_ = params
        est.n_features_in_ = params.num_visible
        return est

    def fit(self, X, y=None):
        X = as_bit_matrix(X)
        cfg = TrainConfig(cd_steps=self.cd_steps, learning_rate=self.learning_rate,
                          epochs=self.n_epochs, batch_size=self.batch_size,
                          seed=int(self.random_state or 0))
        self.params_ = train_cd(X, X.shape[1], self.n_hidden, cfg)
        self.n_features_in_ = X.shape[1]
        return self

    def _make_solver(self) -> QuboSolver:
        if isinstance(self.solver, QuboSolver):
            return self.solver
        sa = SaConfig(sweeps=self.sa_sweeps, beta_start=self.sa_beta_start,
                      beta_end=self.sa_beta_end, restarts=self.sa_restarts,
                      seed=int(self.random_state or 0))
        return make_solver(self.solver, sa, self.endpoint)

    def denoise_config(self) -> DenoiseConfig:
        return DenoiseConfig(sigma_estimate=self.sigma, bias_factor=self.bias_factor,
                             rho_override=self.rho, num_reads=self.num_reads)

    def denoise_rows(self, X) -> List[DenoiseResult]:
        """Full :class:`DenoiseResult` per row (means, reads, penalty)."""
        check_is_fitted(self, "params_")
        X = as_bit_matrix(X, self.n_features_in_)
        cfg = self.denoise_config()
        solver = self._make_solver()
        seeds = seed_sequence(self.random_state).spawn(X.shape[0])
        q = rbm_to_qubo(self.params_)
        rho = cfg.rho()

        def one(k):
            return denoise_qubo(q, X[k], rho, solver, cfg.num_reads, seeds[k])

        workers = self.n_jobs if self.n_jobs and self.n_jobs > 0 else (os.cpu_count() or 1)
        if workers == 1 or X.shape[0] == 1:
            return [one(k) for k in range(X.shape[0])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, range(X.shape[0])))

    def transform(self, X):
        return np.stack([r.denoised_visible for r in self.denoise_rows(X)])
