import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qubo_denoise.core import QuboMatrix, all_states, qubo_energies
from qubo_denoise.denoise import (DenoiseConfig, QuboDenoiser, build_denoise_qubo, denoise,
                                  denoise_qubo, exact_averaged_solution, optimal_rho,
                                  penalized_objective, robust_rho)
from qubo_denoise.noise import NoiseSpec, apply_noise
from qubo_denoise.rbm import RbmParams
from qubo_denoise.solvers import ExhaustiveSolver, QuboSolver, SaConfig, SimulatedAnnealingSolver
from qubo_denoise.solvers.exhaustive import solve_exhaustive
from qubo_denoise.verify import two_pattern_data

from conftest import random_qubo, random_rbm


def test_rho_formulas():
    assert optimal_rho(0.2) == pytest.approx(np.log(4))
    assert optimal_rho(0.1) == pytest.approx(np.log(9))
    assert robust_rho(0.2, 0.75) == pytest.approx(optimal_rho(0.15))
    assert robust_rho(0.2, 1.0) == pytest.approx(optimal_rho(0.2))
    # a smaller bias factor means a larger penalty
    assert robust_rho(0.2, 0.5) > robust_rho(0.2, 1.0)
    for bad in (0.0, 0.5, -0.1):
        with pytest.raises(ValueError):
            optimal_rho(bad)
    with pytest.raises(ValueError):
        robust_rho(0.3, 2.0)


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 7), st.integers(0, 3), st.floats(0.05, 8.0), st.integers(0, 2**31 - 1))
def test_penalty_is_shifted_diagonal(v, hidden, rho, seed):
    r = np.random.default_rng(seed)
    q = random_qubo(v + hidden, r)
    noisy = r.integers(0, 2, v)
    X = all_states(v + hidden)
    direct = penalized_objective(q, noisy, rho, X)
    shifted = qubo_energies(build_denoise_qubo(q, noisy, rho), X)
    np.testing.assert_allclose(direct - shifted, rho * noisy.sum(), atol=1e-9)


def test_hidden_block_untouched(rng):
    q = random_qubo(5, rng)
    qt = build_denoise_qubo(q, [1, 0, 1], 2.0)
    np.testing.assert_array_equal(qt.entries[3:, 3:], q.entries[3:, 3:])
    np.testing.assert_allclose(np.diag(qt.entries)[:3] - np.diag(q.entries)[:3], [-2, 2, -2])


def test_build_validation(rng):
    q = random_qubo(3, rng)
    with pytest.raises(ValueError):
        build_denoise_qubo(q, [0, 1], 0.0)
    with pytest.raises(ValueError):
        build_denoise_qubo(q, [0, 1, 0, 1], 1.0)
    with pytest.raises(ValueError):
        build_denoise_qubo(q, [0, 2], 1.0)


def test_worked_example():
    q = QuboMatrix(np.diag([-3.0, 3.0]))
    # weak penalty: the prior wins
    x, _ = solve_exhaustive(build_denoise_qubo(q, [0, 1], 1.0))
    np.testing.assert_array_equal(x, [1, 0])
    # strong penalty: the noisy image is kept
    x, _ = solve_exhaustive(build_denoise_qubo(q, [0, 1], 10.0))
    np.testing.assert_array_equal(x, [0, 1])


def test_distance_to_noisy_non_increasing_in_rho(rng):
    for _ in range(20):
        q = random_qubo(6, rng, scale=2.0)
        noisy = rng.integers(0, 2, 4)
        dists = []
        for rho in np.linspace(0.1, 12, 25):
            x, _ = solve_exhaustive(build_denoise_qubo(q, noisy, rho))
            dists.append(int(np.count_nonzero(x[:4] != noisy)))
        assert all(a >= b for a, b in zip(dists, dists[1:]))
        assert dists[-1] == 0


def test_minimizer_is_joint_map(rng):
    sigma = 0.15
    for _ in range(15):
        q = random_qubo(6, rng)
        noisy = rng.integers(0, 2, 4)
        X = all_states(6)
        d = (X[:, :4] != noisy).sum(axis=1)
        log_post = -qubo_energies(q, X) + d * np.log(sigma) + (4 - d) * np.log(1 - sigma)
        best = X[np.argmax(log_post)]
        x, _ = solve_exhaustive(build_denoise_qubo(q, noisy, optimal_rho(sigma)))
        np.testing.assert_array_equal(x, best)


class _FixedReads(QuboSolver):
    stochastic = True

    def __init__(self, reads):
        self.reads = [np.asarray(r, dtype=np.uint8) for r in reads]
        self.k = 0

    def _solve(self, q, seed_seq):
        x = self.reads[self.k % len(self.reads)]
        self.k += 1
        return x


def test_read_average_ties_go_to_zero():
    q = QuboMatrix(np.zeros((3, 3)))
    res = denoise_qubo(q, [1, 1], 1.0, _FixedReads([[1, 0, 1], [0, 1, 1], [1, 1, 0]]), num_reads=3)
    np.testing.assert_allclose(res.per_pixel_mean, [2 / 3, 2 / 3])
    np.testing.assert_array_equal(res.denoised_visible, [1, 1])
    res = denoise_qubo(q, [1, 1], 1.0, _FixedReads([[1, 0, 1], [0, 1, 1]]), num_reads=2)
    np.testing.assert_array_equal(res.denoised_visible, [0, 0])
    np.testing.assert_allclose(res.hidden_mean, [1.0])


def test_exact_averaged_solution_limits():
    q = QuboMatrix(np.diag([-5.0, 5.0, 0.3]))
    np.testing.assert_array_equal(exact_averaged_solution(q, [0, 1, 1], 1e-3), [1, 0, 0])
    np.testing.assert_array_equal(exact_averaged_solution(q, [0, 1, 1], 50.0), [0, 1, 1])


def test_denoise_with_rbm_sa_matches_exhaustive(rng):
    p = random_rbm(6, 3, rng)
    noisy = rng.integers(0, 2, 6)
    cfg = DenoiseConfig(sigma_estimate=0.1, num_reads=1)
    exact = denoise(p, noisy, cfg, ExhaustiveSolver())
    sa = denoise(p, noisy, cfg, SimulatedAnnealingSolver(SaConfig(sweeps=500, restarts=3)))
    np.testing.assert_array_equal(exact.denoised_visible, sa.denoised_visible)
    assert exact.rho_used == pytest.approx(robust_rho(0.1))


def test_config_validation():
    with pytest.raises(ValueError):
        DenoiseConfig()
    with pytest.raises(ValueError):
        DenoiseConfig(rho_override=-1.0)
    with pytest.raises(ValueError):
        DenoiseConfig(sigma_estimate=0.1, num_reads=0)
    assert DenoiseConfig(sigma_estimate=0.1, rho_override=2.5).rho() == 2.5


def test_estimator_end_to_end():
    data = two_pattern_data(20)
    est = QuboDenoiser(n_hidden=4, sigma=0.15, num_reads=5, solver="exhaustive",
                       learning_rate=0.1, n_epochs=150, batch_size=10).fit(data)
    clean = data[[0, 1]]
    noisy = clean.copy()
    noisy[0, 0] ^= 1
    noisy[1, 5] ^= 1
    np.testing.assert_array_equal(est.transform(noisy), clean)


def test_estimator_results_independent_of_threads(rng):
    p = random_rbm(5, 3, rng)
    X = rng.integers(0, 2, (6, 5))
    kw = dict(sigma=0.2, num_reads=4, sa_sweeps=100, random_state=3)
    one = QuboDenoiser.from_params(p, n_jobs=1, **kw).transform(X)
    many = QuboDenoiser.from_params(p, n_jobs=-1, **kw).transform(X)
    two = QuboDenoiser.from_params(p, n_jobs=2, **kw).transform(X)
    np.testing.assert_array_equal(one, many)
    np.testing.assert_array_equal(one, two)


def test_estimator_get_params_round_trip():
    est = QuboDenoiser(n_hidden=7, rho=3.0)
    assert QuboDenoiser(**est.get_params()).get_params() == est.get_params()
