"""Comparison denoisers: RBM Gibbs averaging, median, Gaussian and graph-cut MAP."""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil

import networkx as nx
import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator, TransformerMixin

from .core import BinaryImage, as_bit_matrix, as_bits
from .rbm import RbmParams, gibbs_step


@dataclass(frozen=True)
class GibbsDenoiseConfig:
    iterations: int = 20
    decay: float = 0.8
    seed: int = 0

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 < self.decay < 1.0:
            raise ValueError("decay must lie in (0, 1)")


@dataclass(frozen=True)
class GraphCutConfig:
    beta: float = 0.5
    lam: float = 1.0

    def __post_init__(self):
        if self.beta < 0 or not self.lam > 0:
            raise ValueError("need beta >= 0 and lam > 0")


def gibbs_denoise(p: RbmParams, noisy, cfg: GibbsDenoiseConfig = GibbsDenoiseConfig(),
                  rng: np.random.Generator | None = None) -> np.ndarray:
    """Run a Gibbs chain from the noisy vector and threshold a decayed average.

    Sample ``t`` of ``T`` gets weight ``decay ** (T - t)`` (latest heaviest),
    normalized; the average is thresholded strictly above 0.5.
    """
    v = as_bits(noisy, p.num_visible, name="noisy")
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    T = cfg.iterations
    weights = cfg.decay ** np.arange(T - 1, -1, -1, dtype=np.float64)
    weights /= weights.sum()
    acc = np.zeros(v.size)
    for t in range(T):
        v, _ = gibbs_step(p, v, rng)
        acc += weights[t] * v
    return (acc > 0.5).astype(np.uint8)


def _check_image(img) -> BinaryImage:
    if not isinstance(img, BinaryImage):
        raise TypeError("expected a BinaryImage")
    return img


def median_filter(img: BinaryImage, window: int = 3) -> BinaryImage:
    """Binary majority over a ``window x window`` neighborhood, edges replicated."""
    _check_image(img)
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd integer, got {window}")
    out = ndimage.median_filter(img.to_array(), size=window, mode="nearest")
    return BinaryImage.from_array(out)


def gaussian_kernel(sigma_kernel: float) -> np.ndarray:
    """Normalized 2-D Gaussian kernel of radius ``ceil(3 * sigma_kernel)``."""
    if not sigma_kernel > 0:
        raise ValueError("sigma_kernel must be positive")
    r = int(ceil(3.0 * sigma_kernel))
    t = np.arange(-r, r + 1, dtype=np.float64)
    g = np.exp(-0.5 * (t / sigma_kernel) ** 2)
    k = np.outer(g, g)
    return k / k.sum()


def gaussian_filter(img: BinaryImage, sigma_kernel: float = 1.0) -> BinaryImage:
    """Gaussian smoothing then thresholding at 0.5; exact ties keep the pixel."""
    _check_image(img)
    k = gaussian_kernel(sigma_kernel)
    arr = img.to_array()
    smooth = ndimage.correlate(arr.astype(np.float64), k, mode="nearest")
    out = np.where(smooth > 0.5, 1, np.where(smooth < 0.5, 0, arr))
    return BinaryImage.from_array(out.astype(np.uint8))


def graphcut_energy(labels, noisy, cfg: GraphCutConfig = GraphCutConfig()) -> float:
    """``lam * #(x != noisy) + beta * #(4-neighbor pairs that disagree)`` on 2-D arrays."""
    x = np.asarray(labels)
    y = np.asarray(noisy)
    data = np.count_nonzero(x != y)
    pairs = np.count_nonzero(x[1:, :] != x[:-1, :]) + np.count_nonzero(x[:, 1:] != x[:, :-1])
    return cfg.lam * data + cfg.beta * pairs


def graphcut_denoise(img: BinaryImage, cfg: GraphCutConfig = GraphCutConfig()) -> BinaryImage:
    """Exact MAP labeling under a 4-connected Ising prior via one min-cut.

    Pixels left on the source side are labeled 1.
    """
    _check_image(img)
    arr = img.to_array()
    H, W = arr.shape
    if cfg.beta == 0:
        return img
    g = nx.DiGraph()
    src, snk = "s", "t"
    g.add_nodes_from((src, snk))
    for r in range(H):
        for c in range(W):
            node = (r, c)
            if arr[r, c] == 1:
                g.add_edge(src, node, capacity=cfg.lam)
            else:
                g.add_edge(node, snk, capacity=cfg.lam)
            for dr, dc in ((0, 1), (1, 0)):
                rr, cc = r + dr, c + dc
                if rr < H and cc < W:
                    g.add_edge(node, (rr, cc), capacity=cfg.beta)
                    g.add_edge((rr, cc), node, capacity=cfg.beta)
    _, (source_side, _) = nx.minimum_cut(g, src, snk, flow_func=nx.algorithms.flow.boykov_kolmogorov)
    out = np.zeros_like(arr)
    for node in source_side:
        if node != src:
            out[node] = 1
    return BinaryImage.from_array(out)


class _ImageDenoiser(TransformerMixin, BaseEstimator):
    """Row-wise wrapper turning an image filter into a transformer over flattened images."""

    def fit(self, X, y=None):
        X = as_bit_matrix(X)
        h, w = self.image_shape
        if h * w != X.shape[1]:
            raise ValueError(f"image_shape {self.image_shape} does not match {X.shape[1]} features")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        h, w = self.image_shape
        X = as_bit_matrix(X, h * w)
        return np.stack([self._apply(BinaryImage(w, h, row)).pixels for row in X])


class MedianFilterDenoiser(_ImageDenoiser):
    def __init__(self, image_shape=(12, 12), window=3):
        self.image_shape = image_shape
        self.window = window

    def _apply(self, img):
        return median_filter(img, self.window)


class GaussianFilterDenoiser(_ImageDenoiser):
    def __init__(self, image_shape=(12, 12), sigma_kernel=1.0):
        self.image_shape = image_shape
        self.sigma_kernel = sigma_kernel

    def _apply(self, img):
        return gaussian_filter(img, self.sigma_kernel)


class GraphCutDenoiser(_ImageDenoiser):
    def __init__(self, image_shape=(12, 12), beta=0.5, lam=1.0):
        self.image_shape = image_shape
        self.beta = beta
        self.lam = lam

    def _apply(self, img):
        return graphcut_denoise(img, GraphCutConfig(self.beta, self.lam))


class GibbsDenoiser(TransformerMixin, BaseEstimator):
    """Gibbs-averaging baseline driven by an already trained RBM."""

    def __init__(self, params=None, iterations=20, decay=0.8, random_state=0):
        self.params = params
        self.iterations = iterations
        self.decay = decay
        self.random_state = random_state

    def fit(self, X=None, y=None):
        if self.params is None:
            raise ValueError("GibbsDenoiser needs trained RbmParams")
        self.n_features_in_ = self.params.num_visible
        return self

    def transform(self, X):
        X = as_bit_matrix(X, self.params.num_visible)
        cfg = GibbsDenoiseConfig(self.iterations, self.decay)
        rng = np.random.default_rng(self.random_state)
        return np.stack([gibbs_denoise(self.params, row, cfg, rng) for row in X])
