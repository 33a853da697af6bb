"""Restricted Boltzmann machine with binary units.

Energy convention: ``f(v, h) = h^T W v + b_v.v + b_h.h`` and
``P(v, h) = exp(-f(v, h)) / Z``, so low energy means high probability.
Consequently ``P(h_j = 1 | v) = logistic(-(b_h + W v)_j)``.
``W`` has shape ``(num_hidden, num_visible)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import expit, logsumexp
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .core import QuboMatrix, all_states, as_bit_matrix, as_bits


MODEL_FORMAT = "qubo-denoise-rbm"
MODEL_VERSION = 1
MAX_ENUM = 24


@dataclass(frozen=True, eq=False)
class RbmParams:
    """Coupling matrix and biases ``(W, b_v, b_h)`` of an RBM."""

    W: np.ndarray
    b_v: np.ndarray
    b_h: np.ndarray

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64)
        b_v = np.array(self.b_v, dtype=np.float64).reshape(-1)
        b_h = np.array(self.b_h, dtype=np.float64).reshape(-1)
        if W.ndim != 2:
            raise ValueError(f"W must be 2-D, got shape {W.shape}")
        if W.shape != (b_h.size, b_v.size):
            raise ValueError(
                f"W has shape {W.shape}, expected (num_hidden, num_visible) = "
                f"({b_h.size}, {b_v.size})")
        if b_v.size == 0 or b_h.size == 0:
            raise ValueError("RBM needs at least one visible and one hidden unit")
        for name, arr in (("W", W), ("b_v", b_v), ("b_h", b_h)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
            arr.flags.writeable = False
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "b_v", b_v)
        object.__setattr__(self, "b_h", b_h)

    @property
    def num_visible(self) -> int:
        return self.b_v.size

    @property
    def num_hidden(self) -> int:
        return self.b_h.size

    @classmethod
    def zeros(cls, num_visible: int, num_hidden: int) -> "RbmParams":
        return cls(np.zeros((num_hidden, num_visible)), np.zeros(num_visible),
                   np.zeros(num_hidden))

    def __eq__(self, other):
        if not isinstance(other, RbmParams):
            return NotImplemented
        return (np.array_equal(self.W, other.W) and np.array_equal(self.b_v, other.b_v)
                and np.array_equal(self.b_h, other.b_h))

    def save(self, path) -> None:
        """Write an ``.npz`` archive; see README for the field layout."""
        with open(path, "wb") as fh:
            np.savez(fh, format=np.array(MODEL_FORMAT), version=np.array(MODEL_VERSION),
                     num_visible=np.array(self.num_visible),
                     num_hidden=np.array(self.num_hidden),
                     W=self.W, b_v=self.b_v, b_h=self.b_h)

    @classmethod
    def load(cls, path) -> "RbmParams":
        try:
            with np.load(Path(path), allow_pickle=False) as z:
                if str(z["format"]) != MODEL_FORMAT:
                    raise ValueError(f"{path}: not an RBM model file")
                if int(z["version"]) != MODEL_VERSION:
                    raise ValueError(f"{path}: unsupported model version {int(z['version'])}")
                p = cls(z["W"], z["b_v"], z["b_h"])
                if (p.num_visible, p.num_hidden) != (int(z["num_visible"]), int(z["num_hidden"])):
                    raise ValueError(f"{path}: header dimensions disagree with arrays")
                return p
        except (KeyError, OSError, EOFError) as exc:
            raise ValueError(f"{path}: unreadable model file ({exc})") from exc


@dataclass(frozen=True)
class TrainConfig:
    """Contrastive-divergence hyperparameters."""

    cd_steps: int = 1
    learning_rate: float = 0.05
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if self.cd_steps < 1:
            raise ValueError("cd_steps must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


def rbm_energy(p: RbmParams, v, h) -> float:
    v = as_bits(v, p.num_visible, name="v").astype(np.float64)
    h = as_bits(h, p.num_hidden, name="h").astype(np.float64)
    return float(h @ p.W @ v + p.b_v @ v + p.b_h @ h)


def rbm_to_qubo(p: RbmParams) -> QuboMatrix:
    """Embed the RBM energy in a ``(v + h)``-dimensional QUBO over ``concat(v, h)``."""
    nv, nh = p.num_visible, p.num_hidden
    q = np.zeros((nv + nh, nv + nh))
    q[np.arange(nv), np.arange(nv)] = p.b_v
    q[nv + np.arange(nh), nv + np.arange(nh)] = p.b_h
    q[:nv, nv:] = 0.5 * p.W.T
    q[nv:, :nv] = 0.5 * p.W
    return QuboMatrix(q)


def _as_batch(x, n, name):
    x = np.asarray(x)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != n:
        raise ValueError(f"{name} must have {n} columns, got shape {np.shape(x)}")
    return x.astype(np.float64), single


def hidden_conditional(p: RbmParams, v) -> np.ndarray:
    """``P(h_j = 1 | v)``; accepts a single vector or a batch of rows."""
    V, single = _as_batch(v, p.num_visible, "v")
    probs = expit(-(V @ p.W.T + p.b_h))
    return probs[0] if single else probs


def visible_conditional(p: RbmParams, h) -> np.ndarray:
    """``P(v_i = 1 | h)``; accepts a single vector or a batch of rows."""
    H, single = _as_batch(h, p.num_hidden, "h")
    probs = expit(-(H @ p.W + p.b_v))
    return probs[0] if single else probs


def _bernoulli(probs, rng):
    return (rng.random(probs.shape) < probs).astype(np.uint8)


def gibbs_step(p: RbmParams, v, rng):
    """One block-Gibbs sweep ``v -> h' -> v'``; returns ``(v', h')``."""
    h = _bernoulli(hidden_conditional(p, v), rng)
    v_new = _bernoulli(visible_conditional(p, h), rng)
    return v_new, h


def free_energy(p: RbmParams, v) -> np.ndarray:
    """``-log sum_h exp(-f(v, h))`` for each row of ``v``."""
    V, single = _as_batch(v, p.num_visible, "v")
    fe = V @ p.b_v - np.logaddexp(0.0, -(V @ p.W.T + p.b_h)).sum(axis=1)
    return fe[0] if single else fe


def _hidden_free_energy(p: RbmParams, H):
    return H @ p.b_h - np.logaddexp(0.0, -(H @ p.W + p.b_v)).sum(axis=1)


def _check_enumerable(p: RbmParams):
    if p.num_visible + p.num_hidden > MAX_ENUM:
        raise ValueError(
            f"exact computation needs v + h <= {MAX_ENUM}, got "
            f"{p.num_visible} + {p.num_hidden}")


def log_partition(p: RbmParams) -> float:
    _check_enumerable(p)
    if p.num_visible <= p.num_hidden:
        return float(logsumexp(-free_energy(p, all_states(p.num_visible))))
    return float(logsumexp(-_hidden_free_energy(p, all_states(p.num_hidden).astype(float))))


def exact_log_likelihood(p: RbmParams, data) -> float:
    """Total log-likelihood ``sum_k log P(v^k)`` by full enumeration."""
    _check_enumerable(p)
    V = as_bit_matrix(data, p.num_visible, name="data")
    return float(-free_energy(p, V).sum() - V.shape[0] * log_partition(p))


def visible_marginal(p: RbmParams) -> np.ndarray:
    """``P(v)`` for every visible state, in :func:`all_states` order."""
    _check_enumerable(p)
    logp = -free_energy(p, all_states(p.num_visible))
    return np.exp(logp - logsumexp(logp))


def exact_log_likelihood_grad(p: RbmParams, data) -> RbmParams:
    """Gradient of :func:`exact_log_likelihood` with respect to ``(W, b_v, b_h)``.

    Returned in an :class:`RbmParams` container for convenience.
    """
    _check_enumerable(p)
    V = as_bit_matrix(data, p.num_visible, name="data").astype(np.float64)
    N = V.shape[0]
    ph = hidden_conditional(p, V)
    # data term of E[-grad f]; model term via enumeration over the visible layer
    states = all_states(p.num_visible).astype(np.float64)
    pv = visible_marginal(p)
    ph_all = hidden_conditional(p, states)
    dW = -(ph.T @ V) + N * ((ph_all * pv[:, None]).T @ states)
    db_v = -V.sum(axis=0) + N * (pv @ states)
    db_h = -ph.sum(axis=0) + N * (pv @ ph_all)
    return RbmParams(dW, db_v, db_h)


def init_params(num_visible: int, num_hidden: int, rng, scale: float = 1.0) -> RbmParams:
    W = rng.uniform(-0.01, 0.01, size=(num_hidden, num_visible)) * scale
    return RbmParams(W, np.zeros(num_visible), np.zeros(num_hidden))


def train_cd(data, num_visible: int, num_hidden: int, cfg: TrainConfig = TrainConfig(),
             callback=None, init: RbmParams | None = None) -> RbmParams:
    """Fit an RBM with CD-k, chains started at the data.

    ``callback(epoch, params)`` is invoked after every epoch if given.
    """
    V = np.asarray(data)
    if V.size == 0:
        raise ValueError("training data is empty")
    V = as_bit_matrix(V, num_visible, name="data").astype(np.float64)
    rng = np.random.default_rng(cfg.seed)
    p = init if init is not None else init_params(num_visible, num_hidden, rng, cfg.init_scale)
    if (p.num_visible, p.num_hidden) != (num_visible, num_hidden):
        raise ValueError("initial parameters do not match (num_visible, num_hidden)")
    W, b_v, b_h = p.W.copy(), p.b_v.copy(), p.b_h.copy()
    lr = cfg.learning_rate
    n = V.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            v0 = V[order[start:start + cfg.batch_size]]
            ph0 = expit(-(v0 @ W.T + b_h))
            phk, vk = ph0, v0
            for _ in range(cfg.cd_steps):
                hk = (rng.random(phk.shape) < phk).astype(np.float64)
                pvk = expit(-(hk @ W + b_v))
                vk = (rng.random(pvk.shape) < pvk).astype(np.float64)
                phk = expit(-(vk @ W.T + b_h))
            m = v0.shape[0]
            # ascent on log-likelihood: grad = -(<dF/dθ>_data - <dF/dθ>_model)
            W -= lr * (ph0.T @ v0 - phk.T @ vk) / m
            b_v -= lr * (v0.sum(axis=0) - vk.sum(axis=0)) / m
            b_h -= lr * (ph0.sum(axis=0) - phk.sum(axis=0)) / m
        if callback is not None:
            callback(epoch, RbmParams(W, b_v, b_h))
    return RbmParams(W, b_v, b_h)


def reconstruction_error(p: RbmParams, data, seed: int = 0) -> float:
    """Mean per-pixel mismatch after one Gibbs sweep; a cheap training proxy."""
    V = as_bit_matrix(data, p.num_visible, name="data")
    v1, _ = gibbs_step(p, V, np.random.default_rng(seed))
    return float(np.mean(v1 != V))


class RBM(TransformerMixin, BaseEstimator):
    """Bernoulli RBM estimator trained by contrastive divergence.

    Parameters
    ----------
    n_hidden : int, default=50
        Number of hidden units.
    cd_steps : int, default=1
        Gibbs steps in the negative phase (CD-k).
    learning_rate : float, default=0.05
    n_epochs : int, default=50
    batch_size : int, default=64
    random_state : int, default=0
        Seed for initialization and sampling.

    Attributes
    ----------
    params_ : RbmParams
        Fitted coupling matrix and biases.
    n_features_in_ : int
    """

    def __init__(self, n_hidden=50, cd_steps=1, learning_rate=0.05, n_epochs=50,
                 batch_size=64, random_state=0):
        self.n_hidden = n_hidden
        self.cd_steps = cd_steps
        self.learning_rate = learning_rate
        self.n_epochs = n_epochs
        self.batch_size = batch_size
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return TrainConfig(cd_steps=self.cd_steps, learning_rate=self.learning_rate,
                           epochs=self.n_epochs, batch_size=self.batch_size,
                           seed=0 if self.random_state is None else int(self.random_state))

    def fit(self, X, y=None):
        X = as_bit_matrix(X)
        self.n_features_in_ = X.shape[1]
        self.params_ = train_cd(X, X.shape[1], self.n_hidden, self._train_config())
        return self

    def transform(self, X):
        """Hidden activation probabilities ``P(h = 1 | v)``."""
        check_is_fitted(self, "params_")
        return hidden_conditional(self.params_, as_bit_matrix(X, self.n_features_in_))

    def score_samples(self, X):
        """Exact ``log P(v)`` per row; only for models small enough to enumerate."""
        check_is_fitted(self, "params_")
        X = as_bit_matrix(X, self.n_features_in_)
        return -free_energy(self.params_, X) - log_partition(self.params_)

    def gibbs(self, v, random_state=None):
        """One block-Gibbs sweep per row; seeded by ``random_state`` unless overridden."""
        check_is_fitted(self, "params_")
        rng = np.random.default_rng(self.random_state if random_state is None else random_state)
        return gibbs_step(self.params_, as_bit_matrix(v, self.n_features_in_), rng)[0]
