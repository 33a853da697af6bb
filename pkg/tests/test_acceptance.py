"""Acceptance suite: every criterion at its stated tolerance, one PASS/FAIL line each.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines; they are
also printed in the terminal summary.
"""
import pytest

from qubo_denoise import verify

_lines = []


def _check(result):
    line = result.line()
    _lines.append(line)
    print(line)
    assert result.passed, line


@pytest.fixture(scope="module")
def bench_result():
    return verify.bench_properties(seed=0)


def test_penalty_equivalence():
    _check(verify.penalty_equivalence())


def test_optimal_rho_peak():
    _check(verify.optimal_rho_peak())


def test_denoising_improvement():
    _check(verify.denoising_improvement())


def test_sa_quality():
    _check(verify.sa_quality())


def test_graphcut_exactness():
    _check(verify.graphcut_exactness())


def test_noise_calibration():
    _check(verify.noise_calibration())


def test_rbm_training():
    _check(verify.rbm_training())


@pytest.mark.slow
def test_desk_scale_benchmark(bench_result):
    _check(bench_result)


@pytest.mark.slow
def test_benchmark_determinism(bench_result):
    _check(verify.determinism(seed=0, reference_csv=bench_result.stats["csv"]))


def recorded_lines():
    return list(_lines)
