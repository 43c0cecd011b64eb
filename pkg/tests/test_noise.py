import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from giantatoms.correlation import kernel_from_couplings
from giantatoms.errors import ConfigurationError
from giantatoms.noise import (
    draw_modes,
    interpolate,
    sample_squeezed_noise,
    sample_statistic,
    sample_thermal_noise,
    sample_vacuum_noise,
    within_sigma,
)


def test_draws_do_not_depend_on_batching():
    whole = draw_modes(11, np.arange(10), 16)
    parts = np.concatenate([draw_modes(11, np.arange(0, 4), 16), draw_modes(11, np.arange(4, 10), 16)])
    np.testing.assert_array_equal(whole, parts)
    np.testing.assert_array_equal(draw_modes(11, [7], 16)[0], whole[7])
    assert not np.allclose(draw_modes(12, [7], 16), whole[7])


def test_streams_are_independent():
    assert not np.allclose(draw_modes(3, [0], 8, stream=0), draw_modes(3, [0], 8, stream=1))


def test_antithetic_pairs_are_negated():
    d = draw_modes(5, np.arange(6), 8, antithetic=True)
    np.testing.assert_array_equal(d[1], -d[0])
    np.testing.assert_array_equal(d[5], -d[4])
    np.testing.assert_array_equal(d[2], draw_modes(5, [1], 8)[0])


def test_mode_moments():
    z = draw_modes(0, np.arange(20_000), 4)
    assert np.mean(np.abs(z) ** 2) == pytest.approx(1.0, abs=0.02)
    assert abs(np.mean(z**2)) < 0.02


def test_squeezed_quadratures():
    z = draw_modes(0, np.arange(20_000), 2, r=np.array([0.5, 0.5]))
    t = np.tanh(0.5)
    assert np.var(z.real) == pytest.approx(0.5 / (1 + t), rel=0.05)
    assert np.var(z.imag) == pytest.approx(0.5 / (1 - t), rel=0.05)


def test_vacuum_noise_covariance(standard):
    grid, G = standard["grid"], standard["G"]
    times = np.linspace(0.0, 2.0, 21)
    noise = sample_vacuum_noise(G, grid, times, 42, np.arange(20_000))
    alpha = kernel_from_couplings(G[0], G[1], grid, np.array([0.0, 1.2]))
    z = noise.z_star.conj()  # z_mu(t)
    for (mu, nu, i, j), target in [((0, 0, 5, 5), alpha[0, 0, 0]), ((0, 1, 15, 3), alpha[0, 1, 1]), ((1, 0, 15, 3), alpha[1, 0, 1])]:
        est, se_re, se_im = sample_statistic(z[:, mu, i] * noise.z_star[:, nu, j])
        assert within_sigma(est, target, se_re, se_im, nsigma=5)
    est, se_re, se_im = sample_statistic(z[:, 0, 10] * z[:, 1, 4])
    assert within_sigma(est, 0j, se_re, se_im, nsigma=5)


def test_thermal_noise_streams(standard):
    grid, G = standard["grid"], standard["G"]
    times = np.linspace(0, 1, 11)
    n = sample_thermal_noise(G, 0.5 * G, grid, times, 3, np.arange(4))
    assert n.kind == "thermal" and n.w_star.shape == n.z_star.shape
    cold = sample_thermal_noise(G, 0 * G, grid, times, 3, np.arange(4))
    assert np.all(cold.w_star == 0)


def test_unsqueezed_matches_vacuum(standard):
    grid, G = standard["grid"], standard["G"]
    times = np.linspace(0, 1, 11)
    sq = sample_squeezed_noise(G, 0.0, grid, times, 9, np.arange(3))
    vac = sample_vacuum_noise(G, grid, times, 9, np.arange(3))
    np.testing.assert_allclose(sq.z_star, vac.z_star)
    assert np.all(sq.w_star == 0)


def test_shape_validation(standard):
    with pytest.raises(ConfigurationError):
        sample_vacuum_noise(standard["G"][0], standard["grid"], [0.0, 1.0], 0)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(-5, 5), b=st.floats(-5, 5), t=st.floats(0, 2))
def test_interpolation_is_exact_for_lines(a, b, t):
    times = np.linspace(0, 2, 21)
    assert interpolate(a + b * times, times, t) == pytest.approx(a + b * t, abs=1e-9)
