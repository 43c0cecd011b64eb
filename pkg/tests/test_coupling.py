import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from giantatoms.coupling import (
    Comb,
    DoubleGaussian,
    Gaussian,
    build_mode_grid,
    center_separation,
    double_peak_pair,
    fourier_coupling,
    markov_rate,
    strength_for_rate,
    translate,
)
from giantatoms.errors import ConfigurationError, HorizonError


def test_grid_spacing_and_recurrence():
    grid = build_mode_grid(10.0, 128, 10.0)
    assert grid.n == 128
    assert grid.dk == pytest.approx(20.0 / 127)
    assert grid.t_recurrence == pytest.approx(2 * np.pi / grid.dk)
    assert not np.any(grid.k == 0)
    np.testing.assert_allclose(grid.omega, np.abs(grid.k))


def test_band_dispersion():
    grid = build_mode_grid(0.5, 10, 5.0, dispersion="band", omega_c=1.0)
    np.testing.assert_allclose(grid.omega, 1.0 + grid.k)


def test_horizon_guard_reports_limit():
    with pytest.raises(HorizonError, match="maximum allowed t_max"):
        build_mode_grid(10.0, 32, 10.0)


@pytest.mark.parametrize("kw", [dict(k_max=-1, n=10), dict(k_max=1, n=11), dict(k_max=1, n=10, dispersion="cubic")])
def test_grid_validation(kw):
    with pytest.raises(ConfigurationError):
        build_mode_grid(t_max=1.0, **kw)


def test_point_atom_rates():
    lin = build_mode_grid(10.0, 128, 5.0)
    band = build_mode_grid(5.0, 128, 5.0, dispersion="band", omega_c=1.0)
    atom = Comb((0.0,), 0.4)
    assert markov_rate(atom, lin) == pytest.approx(2 * 0.4**2)
    assert markov_rate(atom, band) == pytest.approx(0.4**2)
    g0 = strength_for_rate(atom, lin, 0.1)
    assert markov_rate(Comb((0.0,), g0), lin) == pytest.approx(0.1)


def test_comb_transform_and_normalization():
    comb = Comb((0.0, 1.0), 2.0)
    k = np.array([0.0, np.pi])
    np.testing.assert_allclose(comb.transform(k), [2.0, 0.0], atol=1e-12)
    assert Comb((0.0, 1.0), 1.0, norm=1.0).transform(np.array([0.0]))[0] == pytest.approx(2.0)


def test_gaussian_transform_matches_quadrature():
    g = Gaussian(0.7, 0.3, 1.2)
    x = np.linspace(-4, 5, 20001)
    for k in (0.0, 1.0, 3.0):
        num = np.trapezoid(g.profile(x) * np.exp(-1j * k * x), x)
        assert abs(num - g.transform(np.array([k]))[0]) < 1e-8


def test_double_gaussian_profile_area():
    d = DoubleGaussian(0.0, np.pi, 0.2, 1.0)
    x = np.linspace(-3, 7, 20001)
    assert np.trapezoid(d.profile(x), x) == pytest.approx(2.0, rel=1e-6)
    assert d.transform(np.array([1.0]))[0] == pytest.approx(0.0, abs=1e-12)


def test_width_validation():
    with pytest.raises(ConfigurationError):
        Gaussian(0.0, 0.0)
    with pytest.raises(ConfigurationError):
        Comb(())


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-5, 5), width=st.floats(0.05, 2.0))
def test_translation_is_a_phase(shift, width):
    grid = build_mode_grid(5.0, 64, 5.0)
    base = Gaussian(0.0, width)
    moved = translate(base, shift)
    np.testing.assert_allclose(fourier_coupling(moved, grid), fourier_coupling(base, grid) * np.exp(-1j * grid.k * shift), atol=1e-12)
    assert center_separation(base, moved) == pytest.approx(shift)


def test_double_peak_pair_offsets():
    a, b = double_peak_pair(1.3, np.pi, 0.1)
    assert center_separation(a, b) == pytest.approx(1.3)
    assert b.center2 - b.center1 == pytest.approx(np.pi)
    with pytest.raises(ConfigurationError):
        center_separation(a, Gaussian(0.0, 0.1))
