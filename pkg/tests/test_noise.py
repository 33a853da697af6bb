import numpy as np
import pytest
from hypothesis import given, strategies as st

from qubo_denoise.noise import NoiseSpec, SaltAndPepperNoise, apply_noise, apply_noise_batch


@pytest.mark.parametrize("sigma", [0.05, 0.2, 0.5])
def test_flip_rate_calibrated(sigma):
    x = np.zeros(200_000, dtype=np.uint8)
    rate = apply_noise(x, NoiseSpec(sigma, seed=4)).mean()
    assert abs(rate - sigma) < 4 * np.sqrt(sigma * (1 - sigma) / x.size)


def test_flips_are_xor():
    x = np.ones(50_000, dtype=np.uint8)
    y = apply_noise(x, NoiseSpec(0.3, seed=1))
    z = apply_noise(np.zeros_like(x), NoiseSpec(0.3, seed=1))
    np.testing.assert_array_equal(y, 1 - z)


def test_zero_noise_is_identity():
    x = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
    np.testing.assert_array_equal(apply_noise(x, NoiseSpec(0.0)), x)


def test_seeded_reproducibility():
    x = np.zeros(100, dtype=np.uint8)
    a = apply_noise(x, NoiseSpec(0.2, seed=9))
    b = apply_noise(x, NoiseSpec(0.2, seed=9))
    c = apply_noise(x, NoiseSpec(0.2, seed=10))
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("sigma", [-0.01, 0.51, float("nan")])
def test_sigma_validation(sigma):
    with pytest.raises(ValueError):
        NoiseSpec(sigma)
    with pytest.raises(ValueError):
        apply_noise_batch(np.zeros((2, 2)), sigma, np.random.default_rng())


def test_transformer_advances_generator():
    X = np.zeros((3, 40), dtype=np.uint8)
    t = SaltAndPepperNoise(sigma=0.3, random_state=2).fit(X)
    first, second = t.transform(X), t.transform(X)
    assert not np.array_equal(first, second)
    np.testing.assert_array_equal(SaltAndPepperNoise(0.3, 2).fit_transform(X), first)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=64), st.integers(0, 1000))
def test_half_noise_output_is_binary(bits, seed):
    out = apply_noise(bits, NoiseSpec(0.5, seed))
    assert out.dtype == np.uint8 and set(np.unique(out)) <= {0, 1}
