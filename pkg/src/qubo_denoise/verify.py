"""Self-checks run by ``qubo-denoise verify`` and by the acceptance tests.

Each check returns a :class:`CriterionResult` carrying the measured
statistics; none of them asserts, so callers decide how to report.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable, Dict

import numpy as np

from .baselines import GraphCutConfig, graphcut_denoise
from .bench import ExperimentSpec, run_experiment
from .core import BinaryImage, QuboMatrix, all_states
from .data import gen_bas
from .denoise import build_denoise_qubo, denoise_qubo, exact_averaged_solution, optimal_rho
from .noise import NoiseSpec, apply_noise
from .rbm import (RbmParams, TrainConfig, exact_log_likelihood, exact_log_likelihood_grad,
                  init_params, train_cd)
from .solvers import ExhaustiveSolver, SaConfig, solve_exhaustive, solve_sa


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    stats: Dict[str, object] = field(default_factory=dict)
    seconds: float = 0.0
    budget: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_fmt(v)}" for k, v in self.stats.items()
                          if not isinstance(v, (list, dict))
                          and not (isinstance(v, str) and "\n" in v))
        return f"[{status}] {self.key}: {self.title} ({self.seconds:.1f}s) {shown}"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def _timed(key, title, budget, fn):
    t0 = time.perf_counter()
    passed, stats = fn()
    dt = time.perf_counter() - t0
    within = budget is None or dt < budget
    if budget is not None:
        stats["within_budget"] = within
    return CriterionResult(key, title, bool(passed and within), stats, dt, budget)


def _lex_argmin(energies: np.ndarray) -> int:
    tol = 1e-10 * max(1.0, float(np.abs(energies).max()))
    return int(np.flatnonzero(energies <= energies.min() + tol)[0])


def penalty_equivalence(seed: int = 0, instances: int = 100) -> CriterionResult:
    """Penalized objective and shifted-diagonal QUBO share their argmin."""
    def run():
        rng = np.random.default_rng(seed)
        rhos = (0.5, 1.5, 3.0)
        mismatches, worst_gap = 0, 0.0
        for k in range(instances):
            n = int(rng.integers(2, 13))
            v = int(rng.integers(1, n + 1))
            A = rng.uniform(-2.0, 2.0, size=(n, n))
            Q = np.triu(A) + np.triu(A, 1).T
            noisy = rng.integers(0, 2, size=v)
            rho = rhos[k % 3]
            states = all_states(n).astype(np.float64)
            # direct evaluation of the penalized objective, written out independently
            f_pen = (np.einsum("si,ij,sj->s", states, Q, states)
                     + rho * ((states[:, :v] - noisy) ** 2).sum(axis=1))
            qt = build_denoise_qubo(QuboMatrix(Q), noisy, rho)
            f_qt = np.einsum("si,ij,sj->s", states, qt.entries, states)
            worst_gap = max(worst_gap, float(np.abs(f_pen - f_qt - rho * noisy.sum()).max()))
            x_lib, _ = solve_exhaustive(qt)
            idx_lib = int(x_lib.astype(np.int64) @ (1 << np.arange(n - 1, -1, -1)))
            if _lex_argmin(f_pen) != idx_lib or _lex_argmin(f_qt) != idx_lib:
                mismatches += 1
        return (mismatches == 0 and worst_gap <= 1e-10,
                {"instances": instances, "mismatches": mismatches, "max_constant_gap": worst_gap})

    return _timed("equivalence", "penalized objective == shifted-diagonal QUBO argmin", 10.0, run)


def optimal_rho_peak(seed: int = 0, samples: int = 20000, sigma: float = 0.15,
                         n: int = 8, grid_points: int = 15) -> CriterionResult:
    """Averaged overlap over a rho grid peaks next to log((1 - sigma) / sigma)."""
    def run():
        rng = np.random.default_rng(seed)
        q = QuboMatrix(np.diag(rng.uniform(-2.0, 2.0, size=n)))
        grid = np.linspace(0.2, 4.0, grid_points)
        step = grid[1] - grid[0]
        rho_opt = optimal_rho(sigma)
        states = all_states(n)
        # exact Boltzmann sampling of the clean vector
        e = np.einsum("si,ij,sj->s", states.astype(float), q.entries, states.astype(float))
        p = np.exp(-(e - e.min()))
        p /= p.sum()
        X = states[rng.choice(len(states), size=samples, p=p)]
        noisy = X ^ (rng.random(X.shape) < sigma).astype(np.uint8)
        noisy_idx = noisy.astype(np.int64) @ (1 << np.arange(n - 1, -1, -1))
        spins_x = 2.0 * X - 1.0
        M, se = [], []
        for rho in grid:
            table = np.stack([exact_averaged_solution(q, s, rho) for s in states])
            est = table[noisy_idx]
            m = ((2.0 * est - 1.0) * spins_x).mean(axis=1)
            M.append(m.mean())
            se.append(m.std(ddof=1) / np.sqrt(samples))
        M, se = np.array(M), np.array(se)
        maximizers = grid[M == M.max()]
        near = bool(np.any(np.abs(maximizers - rho_opt) <= step + 1e-12))
        star = int(np.argmin(np.abs(grid - rho_opt)))
        dominance = bool(np.all(M[star] >= M - 2.0 * se))
        return (near and dominance,
                {"rho_opt": rho_opt, "grid_step": float(step),
                 "argmax_rho": float(maximizers[np.argmin(np.abs(maximizers - rho_opt))]),
                 "n_tied_maximizers": int(maximizers.size),
                 "M_at_nearest_grid": float(M[star]), "M_max": float(M.max()),
                 "max_se": float(se.max()), "M": M.tolist(), "grid": grid.tolist()})

    return _timed("optimal-rho", "optimal rho maximizes averaged overlap", 300.0, run)


def denoising_improvement(seed: int = 0, trials: int = 50000, sigma: float = 0.2) -> CriterionResult:
    """Exact denoising beats the noisy image for a diagonal model with strong pixels."""
    def run():
        rng = np.random.default_rng(seed)
        diag = np.array([3.0, -3.0, 3.0, -3.0, 0.1, -0.1, 0.1, -0.1])
        q = QuboMatrix(np.diag(diag))
        rho = float(np.log(0.8 / 0.2))
        p1 = 1.0 / (1.0 + np.exp(diag))
        X = (rng.random((trials, diag.size)) < p1).astype(np.uint8)
        noisy = X ^ (rng.random(X.shape) < sigma).astype(np.uint8)
        solver = ExhaustiveSolver()
        cache = {}
        diff = np.empty(trials)
        den_match = np.empty(trials)
        for t in range(trials):
            key = noisy[t].tobytes()
            if key not in cache:
                cache[key] = denoise_qubo(q, noisy[t], rho, solver).denoised_visible
            den_match[t] = np.mean(cache[key] == X[t])
            diff[t] = den_match[t] - np.mean(noisy[t] == X[t])
        margin = diff.mean()
        se = diff.std(ddof=1) / np.sqrt(trials)
        return (margin >= 3.0 * se and margin > 0,
                {"denoised_match": float(den_match.mean()),
                 "noisy_match": float(den_match.mean() - margin),
                 "margin": float(margin), "se": float(se), "z": float(margin / se)})

    return _timed("improvement", "denoised overlap strictly exceeds noisy overlap", 120.0, run)


def sa_quality(seed: int = 0, instances: int = 100, n: int = 16) -> CriterionResult:
    """Annealing with restarts hits the exhaustive optimum on random 16-variable QUBOs."""
    def run():
        rng = np.random.default_rng(seed)
        hits = 0
        for k in range(instances):
            A = rng.uniform(-1.0, 1.0, size=(n, n))
            q = QuboMatrix(np.triu(A) + np.triu(A, 1).T)
            _, e_opt = solve_exhaustive(q)
            _, e_sa = solve_sa(q, SaConfig(restarts=4, seed=seed * 1000 + k))
            hits += abs(e_sa - e_opt) <= 1e-9 * max(1.0, abs(e_opt))
        return hits >= 95 * instances // 100, {"instances": instances, "optimal_hits": hits}

    return _timed("sa", "simulated annealing reaches the exact optimum", 60.0, run)


def graphcut_exactness(seed: int = 0, images: int = 50) -> CriterionResult:
    """Min-cut labeling matches brute force on random 4x4 images."""
    def run():
        rng = np.random.default_rng(seed)
        cfg = GraphCutConfig(beta=0.5, lam=1.0)
        labels = all_states(16).reshape(-1, 4, 4)
        pair = (np.count_nonzero(labels[:, 1:, :] != labels[:, :-1, :], axis=(1, 2))
                + np.count_nonzero(labels[:, :, 1:] != labels[:, :, :-1], axis=(1, 2)))
        exact = 0
        for _ in range(images):
            img = rng.integers(0, 2, size=(4, 4)).astype(np.uint8)
            brute = (cfg.lam * np.count_nonzero(labels != img, axis=(1, 2)) + cfg.beta * pair).min()
            out = graphcut_denoise(BinaryImage.from_array(img), cfg).to_array()
            got = (cfg.lam * np.count_nonzero(out != img)
                   + cfg.beta * (np.count_nonzero(out[1:] != out[:-1])
                                 + np.count_nonzero(out[:, 1:] != out[:, :-1])))
            exact += got == brute
        return exact == images, {"images": images, "exact": int(exact)}

    return _timed("graphcut", "graph cut reaches brute-force minimum", 120.0, run)


def noise_calibration(seed: int = 0, n: int = 100_000) -> CriterionResult:
    """Empirical flip rate sits within three standard errors of sigma."""
    def run():
        stats, ok = {}, True
        x = np.zeros(n, dtype=np.uint8)
        for k, sigma in enumerate((0.05, 0.25, 0.5)):
            rate = apply_noise(x, NoiseSpec(sigma, seed + k)).mean()
            tol = 3.0 * np.sqrt(sigma * (1 - sigma) / n)
            ok &= abs(rate - sigma) <= tol
            stats[f"rate@{sigma}"] = float(rate)
            stats[f"tol@{sigma}"] = float(tol)
        return ok, stats

    return _timed("noise", "salt-and-pepper flip rate calibrated", None, run)


def two_pattern_data(copies: int = 50) -> np.ndarray:
    patterns = np.array([[1, 1, 1, 0, 0, 0], [0, 0, 0, 1, 1, 1]], dtype=np.uint8)
    return np.repeat(patterns, copies, axis=0)


def gradient_check(p: RbmParams, data, step: float = 1e-5):
    """Largest relative disagreement between analytic and central-difference gradients.

    Components where both values are below 1e-6 in magnitude are compared
    absolutely instead, since their relative error is meaningless.
    """
    grad = exact_log_likelihood_grad(p, data)
    worst = 0.0
    for name in ("W", "b_v", "b_h"):
        base = getattr(p, name)
        analytic = getattr(grad, name)
        for idx in np.ndindex(base.shape):
            vals = []
            for sgn in (1.0, -1.0):
                arrs = {k: getattr(p, k).copy() for k in ("W", "b_v", "b_h")}
                arrs[name][idx] += sgn * step
                vals.append(exact_log_likelihood(RbmParams(**arrs), data))
            fd = (vals[0] - vals[1]) / (2 * step)
            a = analytic[idx]
            scale = max(abs(a), abs(fd))
            err = abs(a - fd) / scale if scale > 1e-6 else abs(a - fd)
            worst = max(worst, err)
    return worst


def rbm_training(seed: int = 0) -> CriterionResult:
    """CD training on two patterns closes most of the likelihood gap; gradients match finite differences."""
    def run():
        data = two_pattern_data()
        cfg = TrainConfig(cd_steps=1, learning_rate=0.1, epochs=200, batch_size=10, seed=seed)
        init = init_params(6, 3, np.random.default_rng(seed))
        ll0 = exact_log_likelihood(init, data)
        trained = train_cd(data, 6, 3, cfg, init=init)
        ll1 = exact_log_likelihood(trained, data)
        ll_emp = data.shape[0] * np.log(0.5)
        frac = (ll1 - ll0) / (ll_emp - ll0)
        rnd = np.random.default_rng(seed + 1)
        random_model = RbmParams(rnd.normal(size=(3, 6)), rnd.normal(size=6), rnd.normal(size=3))
        g_err = max(gradient_check(trained, data), gradient_check(random_model, data))
        return (frac >= 0.3 and g_err <= 1e-4,
                {"ll_init": ll0, "ll_trained": ll1, "ll_empirical": float(ll_emp),
                 "gap_fraction": float(frac), "grad_rel_err": float(g_err)})

    return _timed("rbm", "CD training closes the likelihood gap; gradient check", None, run)


BENCH_SIGMAS = (0.05, 0.1, 0.15, 0.2)
BENCH_METHODS = ("qubo-sa:b=0.75", "qubo-sa:b=1", "median")


def bench_spec(seed: int = 0, resamples: int = 10000) -> ExperimentSpec:
    """The desk-scale 6x6 Bars-and-Stripes experiment behind the bench and determinism checks."""
    train = gen_bas(6, 6, 4000, seed=seed * 10 + 1, split="train")
    test = gen_bas(6, 6, 1000, seed=seed * 10 + 2, split="test")
    model = train_cd(train.pixels, 36, 20, TrainConfig(cd_steps=5, learning_rate=0.05,
                                                      epochs=300, batch_size=64, seed=seed))
    return ExperimentSpec(test, list(BENCH_SIGMAS), list(BENCH_METHODS), model=model,
                          images_per_sigma=100, bootstrap_resamples=resamples,
                          master_seed=seed, num_reads=20, sa=SaConfig(seed=seed))


def _non_increasing(rows):
    return all(b.mean_overlap <= a.mean_overlap for a, b in zip(rows, rows[1:]))


def bench_properties(seed: int = 0, report=None) -> CriterionResult:
    """Desk-scale benchmark: overlap falls with sigma, QUBO beats median, b=0.75 is not worse than b=1."""
    def run():
        rep = report if report is not None else run_experiment(bench_spec(seed))
        q75 = [rep.row(s, "qubo-sa:b=0.75") for s in BENCH_SIGMAS]
        q10 = [rep.row(s, "qubo-sa:b=1") for s in BENCH_SIGMAS]
        a = _non_increasing(q75) and _non_increasing(q10)
        r75, med = rep.row(0.1, "qubo-sa:b=0.75"), rep.row(0.1, "median")
        med_mid = 0.5 * (med.ci_low + med.ci_high)
        b = r75.mean_overlap >= med.mean_overlap and r75.ci_low >= med_mid
        c = all(x.ci_high >= y.ci_low for x, y in zip(q75, q10))
        ordering = "".join(">" if x.mean_overlap > y.mean_overlap else
                           "=" if x.mean_overlap == y.mean_overlap else "<"
                           for x, y in zip(q75, q10))
        failures = sum(len(r.failures) for r in rep.rows)
        stats = {"a_monotone": a, "b_beats_median": b, "c_bias_0.75_vs_1": c,
                 "b075_vs_b1_ordering": ordering, "failures": failures,
                 "qubo075@0.1": r75.mean_overlap, "median@0.1": med.mean_overlap,
                 "csv": rep.to_csv()}
        for r75_, r10_ in zip(q75, q10):
            stats[f"b0.75@{r75_.sigma}"] = r75_.mean_overlap
            stats[f"b1@{r10_.sigma}"] = r10_.mean_overlap
        return a and b and c and failures == 0, stats

    return _timed("bench", "desk-scale BAS benchmark properties", 900.0, run)


def determinism(seed: int = 0, reference_csv: str | None = None) -> CriterionResult:
    """Two benchmark runs with one seed give byte-identical CSV."""
    def run():
        first = reference_csv or run_experiment(bench_spec(seed)).to_csv()
        second = run_experiment(bench_spec(seed)).to_csv()
        return first == second, {"identical_csv": first == second, "csv_bytes": len(second)}

    return _timed("determinism", "benchmark CSV is bit-identical across runs", None, run)


CRITERIA: Dict[str, Callable[..., CriterionResult]] = {
    "equivalence": penalty_equivalence,
    "optimal-rho": optimal_rho_peak,
    "improvement": denoising_improvement,
    "sa": sa_quality,
    "graphcut": graphcut_exactness,
    "noise": noise_calibration,
    "rbm": rbm_training,
    "bench": bench_properties,
    "determinism": determinism,
}


def run_all(only=None, seed: int = 0, echo=print):
    """Run the selected criteria (all by default), sharing the benchmark run."""
    keys = list(CRITERIA) if not only else list(only)
    unknown = [k for k in keys if k not in CRITERIA]
    if unknown:
        raise ValueError(f"unknown criteria: {', '.join(unknown)}")
    results = []
    bench_csv = None
    for key in keys:
        if key == "determinism" and bench_csv is not None:
            res = determinism(seed, reference_csv=bench_csv)
        else:
            res = CRITERIA[key](seed)
        if key == "bench":
            bench_csv = res.stats.get("csv")
        results.append(res)
        if echo is not None:
            echo(res.line())
    return results
