"""Noise-sweep experiments comparing denoisers on a shared set of noisy images.

Every random draw is derived from ``master_seed`` through
``numpy.random.SeedSequence(master_seed, spawn_key=...)`` with a fixed key per
purpose (image selection, noise, sigma guesses, per-image method seeds,
bootstrap), so reports are reproducible regardless of thread count.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .baselines import (GibbsDenoiseConfig, GraphCutConfig, gaussian_filter, gibbs_denoise,
                        graphcut_denoise, median_filter)
from .core import BinaryImage, as_bits, hamming
from .data import Dataset
from .denoise import denoise_qubo, robust_rho
from .rbm import RbmParams, rbm_to_qubo
from .solvers import SaConfig, make_solver

logger = logging.getLogger(__name__)

CSV_FIELDS = ("sigma", "method", "mean_overlap", "ci_low", "ci_high", "n_images", "seed")

_KEY_SELECT, _KEY_NOISE, _KEY_GUESS, _KEY_METHOD, _KEY_BOOT = range(5)


def pixel_match_rate(denoised, original) -> float:
    """Fraction of positions where ``denoised`` equals ``original``."""
    denoised = as_bits(denoised, name="denoised")
    return 1.0 - hamming(denoised, original) / denoised.size


def bootstrap_ci(values, resamples: int = 10000, level: float = 0.95,
                 seed=0) -> Tuple[float, float]:
    """Percentile bootstrap interval for the mean of ``values``.

    The bounds are widened to include the sample mean when floating-point
    rounding would otherwise leave it a hair outside.
    """
    vals = np.asarray(values, dtype=np.float64).reshape(-1)
    if vals.size == 0:
        raise ValueError("bootstrap_ci needs at least one value")
    if resamples < 1:
        raise ValueError("resamples must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    means = np.empty(resamples)
    step = max(1, 2_000_000 // vals.size)
    for start in range(0, resamples, step):
        stop = min(resamples, start + step)
        idx = rng.integers(0, vals.size, size=(stop - start, vals.size))
        means[start:stop] = vals[idx].mean(axis=1)
    alpha = (1.0 - level) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    m = vals.mean()
    return float(min(low, m)), float(max(high, m))


def guess_sigma(true_sigma: float, rng: np.random.Generator) -> float:
    """Draw a noise-level guess uniformly from ``[0.75 sigma, 1.25 sigma]``, kept inside (0, 0.5)."""
    if not 0.0 < true_sigma < 0.5:
        raise ValueError(f"true_sigma must lie in (0, 0.5), got {true_sigma}")
    g = rng.uniform(0.75 * true_sigma, 1.25 * true_sigma)
    return float(min(max(g, np.nextafter(0.0, 1.0)), np.nextafter(0.5, 0.0)))


# ----------------------------------------------------------------------------- methods

_DEFAULTS = {
    "identity": {},
    "qubo": {"b": 1.0, "guess": 0.0, "reads": None, "rho": None, "solver": "sa"},
    "gibbs": {"iterations": 20, "decay": 0.8},
    "median": {"window": 3},
    "gaussian": {"sigma": 1.0},
    "graphcut": {"beta": 0.5, "lam": 1.0},
}

_ALIASES = {
    "qubo-sa": ("qubo", {"solver": "sa"}),
    "qubo-exhaustive": ("qubo", {"solver": "exhaustive"}),
    "qubo-remote": ("qubo", {"solver": "remote"}),
    "qubo-sa-guess": ("qubo", {"solver": "sa", "guess": 1.0, "b": 0.75}),
    "qubo-exhaustive-guess": ("qubo", {"solver": "exhaustive", "guess": 1.0, "b": 0.75}),
}


@dataclass(frozen=True)
class MethodSpec:
    """A denoiser plus its settings; ``label`` is what appears in reports."""

    label: str
    kind: str
    params: Tuple[Tuple[str, object], ...] = ()

    def get(self, key):
        return dict(self.params)[key]


def parse_method(text: str) -> MethodSpec:
    """Parse ``name[:key=value[:key=value...]]``, e.g. ``qubo-sa:b=0.75``."""
    head, *opts = text.strip().split(":")
    if head in _ALIASES:
        kind, preset = _ALIASES[head]
    elif head in _DEFAULTS:
        kind, preset = head, {}
    else:
        raise ValueError(f"unknown method {head!r}")
    params = dict(_DEFAULTS[kind])
    params.update(preset)
    for opt in opts:
        key, sep, val = opt.partition("=")
        if not sep or key not in params:
            raise ValueError(f"bad option {opt!r} for method {head!r}")
        params[key] = val if key == "solver" else float(val)
    return MethodSpec(text.strip(), kind, tuple(sorted(params.items())))


def bias_sweep_methods(factors=(1.25, 1.0, 0.75, 0.5), solver: str = "sa") -> List[MethodSpec]:
    return [parse_method(f"qubo-{solver}:b={b}") for b in factors]


def comparison_methods(solver: str = "sa") -> List[MethodSpec]:
    names = [f"qubo-{solver}", f"qubo-{solver}-guess", "gibbs", "median", "gaussian",
             "graphcut"]
    return [parse_method(n) for n in names]


# ----------------------------------------------------------------------------- experiment

@dataclass
class ExperimentSpec:
    dataset: Dataset
    sigma_grid: Sequence[float]
    methods: Sequence
    model: Optional[RbmParams] = None
    images_per_sigma: int = 200
    bootstrap_resamples: int = 10000
    master_seed: int = 0
    num_reads: int = 100
    sa: SaConfig = SaConfig()
    endpoint: Optional[str] = None
    n_jobs: int = 1

    def __post_init__(self):
        self.methods = [m if isinstance(m, MethodSpec) else parse_method(m) for m in self.methods]
        if not self.sigma_grid:
            raise ValueError("sigma_grid is empty")
        for s in self.sigma_grid:
            if not 0.0 < s <= 0.5:
                raise ValueError(f"sigma {s} outside (0, 0.5]")
        if self.images_per_sigma < 1 or self.images_per_sigma > len(self.dataset):
            raise ValueError(f"images_per_sigma must be in [1, {len(self.dataset)}]")
        if self.num_reads < 1 or self.bootstrap_resamples < 1:
            raise ValueError("num_reads and bootstrap_resamples must be >= 1")
        needs_model = any(m.kind in ("qubo", "gibbs") for m in self.methods)
        if needs_model:
            if self.model is None:
                raise ValueError("RBM-based methods need a trained model")
            if self.model.num_visible != self.dataset.width * self.dataset.height:
                raise ValueError("model visible size does not match dataset image size")
        if self.endpoint is None and any(
                m.kind == "qubo" and m.get("solver") == "remote" for m in self.methods):
            raise ValueError("remote QUBO methods need an endpoint")
        labels = [m.label for m in self.methods]
        if len(set(labels)) != len(labels):
            raise ValueError("method labels must be unique")


@dataclass
class ReportRow:
    sigma: float
    method: str
    mean_overlap: float
    ci_low: float
    ci_high: float
    n_images: int
    seed: int
    overlaps: List[float] = field(default_factory=list)
    failures: List[str] = field(default_factory=list)


@dataclass
class ExperimentReport:
    rows: List[ReportRow]
    metadata: Dict[str, object] = field(default_factory=dict)

    def row(self, sigma: float, method: str) -> ReportRow:
        for r in self.rows:
            if r.sigma == sigma and r.method == method:
                return r
        raise KeyError((sigma, method))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([repr(r.sigma), r.method, repr(r.mean_overlap), repr(r.ci_low),
                        repr(r.ci_high), r.n_images, r.seed])
        return buf.getvalue()


def _derive(master: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master, spawn_key=tuple(int(k) for k in keys))


class _Runner:
    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.qubo = rbm_to_qubo(spec.model) if spec.model is not None else None
        self._solvers = {}

    def solver(self, name):
        if name not in self._solvers:
            self._solvers[name] = make_solver(name, self.spec.sa, self.spec.endpoint)
        return self._solvers[name]

    def apply(self, m: MethodSpec, noisy: np.ndarray, sigma: float, sigma_guess: float,
              seed: np.random.SeedSequence) -> np.ndarray:
        ds = self.spec.dataset
        p = dict(m.params)
        if m.kind == "identity":
            return noisy
        if m.kind == "qubo":
            if p["rho"] is not None:
                rho = float(p["rho"])
            else:
                rho = robust_rho(sigma_guess if p["guess"] else sigma, p["b"])
            reads = int(p["reads"]) if p["reads"] is not None else self.spec.num_reads
            res = denoise_qubo(self.qubo, noisy, rho, self.solver(p["solver"]), reads, seed)
            return res.denoised_visible
        if m.kind == "gibbs":
            cfg = GibbsDenoiseConfig(int(p["iterations"]), float(p["decay"]))
            return gibbs_denoise(self.spec.model, noisy, cfg, np.random.default_rng(seed))
        img = BinaryImage(ds.width, ds.height, noisy)
        if m.kind == "median":
            return median_filter(img, int(p["window"])).pixels
        if m.kind == "gaussian":
            return gaussian_filter(img, float(p["sigma"])).pixels
        if m.kind == "graphcut":
            return graphcut_denoise(img, GraphCutConfig(float(p["beta"]), float(p["lam"]))).pixels
        raise ValueError(f"unknown method kind {m.kind!r}")


def _workers(n_jobs: int) -> int:
    if n_jobs is None or n_jobs < 1:
        return os.cpu_count() or 1
    return n_jobs


def noisy_batch(spec: ExperimentSpec, sigma_index: int):
    """Selected test indices, clean rows and noisy rows for one grid point."""
    sigma = spec.sigma_grid[sigma_index]
    ds = spec.dataset
    sel_rng = np.random.default_rng(_derive(spec.master_seed, sigma_index, _KEY_SELECT))
    chosen = sel_rng.choice(len(ds), size=spec.images_per_sigma, replace=False)
    clean = ds.pixels[chosen]
    noise_rng = np.random.default_rng(_derive(spec.master_seed, sigma_index, _KEY_NOISE))
    noisy = clean ^ (noise_rng.random(clean.shape) < sigma).astype(np.uint8)
    return chosen, clean, noisy


def run_experiment(spec: ExperimentSpec, progress=None) -> ExperimentReport:
    """Run every method on the same noisy images for every sigma and aggregate.

    A method raising on one image is recorded in that row's ``failures`` and
    excluded from the statistics; configuration problems raise immediately.
    """
    runner = _Runner(spec)
    rows: List[ReportRow] = []
    batch_hashes = {}
    t0 = time.time()
    workers = _workers(spec.n_jobs)
    for s_idx, sigma in enumerate(spec.sigma_grid):
        _, clean, noisy = noisy_batch(spec, s_idx)
        batch_hashes[repr(sigma)] = hashlib.sha256(noisy.tobytes()).hexdigest()
        guess_rng = np.random.default_rng(_derive(spec.master_seed, s_idx, _KEY_GUESS))
        guesses = ([guess_sigma(sigma, guess_rng) for _ in range(len(noisy))]
                   if sigma < 0.5 else [sigma] * len(noisy))
        for m_idx, method in enumerate(spec.methods):
            def one(k, method=method, m_idx=m_idx):
                seed = _derive(spec.master_seed, s_idx, _KEY_METHOD, m_idx, k)
                try:
                    out = runner.apply(method, noisy[k].copy(), sigma, guesses[k], seed)
                    return pixel_match_rate(out, clean[k]), None
                except Exception as exc:  # recorded per image, see docstring
                    return None, f"image {k}: {type(exc).__name__}: {exc}"

            if workers == 1:
                results = [one(k) for k in range(len(noisy))]
            else:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    results = list(pool.map(one, range(len(noisy))))
            overlaps = [r for r, _ in results if r is not None]
            failures = [e for _, e in results if e is not None]
            if overlaps:
                mean = float(np.mean(overlaps))
                lo, hi = bootstrap_ci(overlaps, spec.bootstrap_resamples,
                                      seed=_derive(spec.master_seed, s_idx, _KEY_BOOT, m_idx))
            else:
                mean = lo = hi = float("nan")
            rows.append(ReportRow(float(sigma), method.label, mean, lo, hi, len(overlaps),
                                  spec.master_seed, overlaps, failures))
            if failures:
                logger.warning("%s at sigma=%s: %d failures", method.label, sigma, len(failures))
            if progress is not None:
                progress(rows[-1])
    meta = {
        "master_seed": spec.master_seed,
        "dataset": {"name": spec.dataset.name, "width": spec.dataset.width,
                    "height": spec.dataset.height, "count": len(spec.dataset)},
        "sigma_grid": [float(s) for s in spec.sigma_grid],
        "methods": [{"label": m.label, "kind": m.kind, "params": dict(m.params)}
                    for m in spec.methods],
        "images_per_sigma": spec.images_per_sigma,
        "bootstrap_resamples": spec.bootstrap_resamples,
        "num_reads": spec.num_reads,
        "sa": asdict(spec.sa),
        "noisy_batch_sha256": batch_hashes,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "elapsed_seconds": round(time.time() - t0, 3),
    }
    return ExperimentReport(rows, meta)


# ----------------------------------------------------------------------------- output

def read_csv(path) -> List[dict]:
    with open(path, newline="") as fh:
        out = []
        for rec in csv.DictReader(fh):
            out.append({"sigma": float(rec["sigma"]), "method": rec["method"],
                        "mean_overlap": float(rec["mean_overlap"]),
                        "ci_low": float(rec["ci_low"]), "ci_high": float(rec["ci_high"]),
                        "n_images": int(rec["n_images"]), "seed": int(rec["seed"])})
        return out


def _plot_svg(report: ExperimentReport, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "qubo-denoise"
    fig, ax = plt.subplots(figsize=(6, 4))
    methods = list(dict.fromkeys(r.method for r in report.rows))
    for m in methods:
        rs = sorted((r for r in report.rows if r.method == m), key=lambda r: r.sigma)
        x = np.array([r.sigma for r in rs])
        y = np.array([r.mean_overlap for r in rs])
        err = np.array([[r.mean_overlap - r.ci_low for r in rs],
                        [r.ci_high - r.mean_overlap for r in rs]])
        ax.errorbar(x, y, yerr=err, marker="o", capsize=3, label=m)
    ax.set_xlabel("noise level sigma")
    ax.set_ylabel("fraction of pixels matching original")
    if methods:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_report(report: ExperimentReport, out_dir, stem: str = "report",
                formats: Sequence[str] = ("csv", "svg", "json")) -> Dict[str, Path]:
    """Write ``<stem>.csv``, ``<stem>.svg`` and a ``<stem>.meta.json`` sidecar."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = {}
    if "csv" in formats:
        p = out_dir / f"{stem}.csv"
        p.write_text(report.to_csv())
        written["csv"] = p
    if "svg" in formats:
        p = out_dir / f"{stem}.svg"
        _plot_svg(report, p)
        written["svg"] = p
    if "json" in formats:
        p = out_dir / f"{stem}.meta.json"
        meta = dict(report.metadata)
        meta["failures"] = {f"{r.method}@{r.sigma}": r.failures for r in report.rows if r.failures}
        p.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")
        written["json"] = p
    return written
