import numpy as np
import pytest

from giantatoms.correlation import build_kernel, build_squeezed_pair, build_thermal_pair
from giantatoms.coupling import Comb, build_mode_grid, fourier_coupling
from giantatoms.dynamics import master_equation_solve
from giantatoms.errors import ConfigurationError
from giantatoms.osolver import evolve_matrix_field
from giantatoms.thermal_squeezed import (
    evolve_dual_field_squeezed,
    evolve_dual_field_thermal,
    squeezed_generator_terms,
    thermal_ensemble,
    thermal_excitation,
    thermal_lindblad_solve,
    thermal_master_solve,
)
from giantatoms.noise import sample_squeezed_noise


@pytest.fixture(scope="module")
def band():
    grid = build_mode_grid(0.9, 64, 3.0, dispersion="band", omega_c=1.0)
    atoms = (Comb((0.0,), 0.2), Comb((0.0,), 0.0))
    return grid, atoms, 0.01, 3.0


def test_cold_bath_reduces_to_vacuum(band, h_a):
    grid, atoms, dt, t_max = band
    pair = build_thermal_pair(atoms, grid, 200.0, dt, t_max)
    dual = evolve_dual_field_thermal(pair, h_a, dt, t_max)
    hot = thermal_master_solve("eg", dual, h_a, dt, t_max)
    vac = master_equation_solve("eg", evolve_matrix_field(build_kernel(atoms, grid, dt, t_max), h_a, dt, t_max), h_a, dt, t_max)
    assert np.abs(hot.rho - vac.rho).max() < 1e-10


def test_warm_bath_heats_ground_state(band, h_a):
    grid, atoms, dt, t_max = band
    pair = build_thermal_pair(atoms, grid, 1.0, dt, t_max)
    dual = evolve_dual_field_thermal(pair, h_a, dt, t_max)
    out = thermal_master_solve("gg", dual, h_a, dt, t_max)
    p_e = out.populations()[:, 0] + out.populations()[:, 1]
    assert p_e[-1] > 1e-3
    np.testing.assert_allclose(out.trace, 1.0, atol=1e-8)
    # atom b is uncoupled and stays in its ground state
    assert np.max(out.populations()[:, 2] + out.populations()[:, 0]) < 1e-12


def test_markov_thermal_formula():
    out = thermal_lindblad_solve((0.1, 0.0), 0.5, "gg", 0.05, 10.0)
    pe = out.populations()[:, 0] + out.populations()[:, 1]
    np.testing.assert_allclose(pe, thermal_excitation(0.1, 0.5, out.times), atol=1e-10)


def test_thermal_ensemble_follows_master(band, h_a):
    grid, atoms, dt, t_max = band
    pair = build_thermal_pair(atoms, grid, 1.0, dt, t_max)
    dual = evolve_dual_field_thermal(pair, h_a, dt, t_max)
    G = np.stack([fourier_coupling(a, grid) for a in atoms])
    sse = thermal_ensemble("eg", dual, pair, h_a, G, grid, 400, 3)
    ref = thermal_master_solve("eg", dual, h_a, dt, t_max)
    assert np.abs(sse.normalized() - ref.rho).max() < 5 * max(sse.stderr.max(), 1e-3)


def test_thermal_master_needs_thermal_field(band, h_a):
    grid, atoms, dt, t_max = band
    sq = evolve_dual_field_squeezed(build_squeezed_pair(atoms, grid, 0.2, dt, 1.0), h_a, dt, 1.0)
    with pytest.raises(ConfigurationError):
        thermal_master_solve("eg", sq, h_a, dt, 1.0)


def test_unsqueezed_field_has_no_w_part(band, h_a):
    grid, atoms, dt, _ = band
    dual = evolve_dual_field_squeezed(build_squeezed_pair(atoms, grid, 0.0, dt, 1.0), h_a, dt, 1.0)
    assert np.all(dual.obar_w == 0)
    vac = evolve_matrix_field(build_kernel(atoms, grid, dt, 1.0), h_a, dt, 1.0, window=None)
    np.testing.assert_allclose(dual.obar_z, vac.obar, atol=1e-12)


def test_squeezed_generator_shape(band, h_a):
    grid, atoms, dt, _ = band
    pair = build_squeezed_pair(atoms, grid, 0.3, dt, 1.0)
    dual = evolve_dual_field_squeezed(pair, h_a, dt, 1.0)
    G = np.stack([fourier_coupling(a, grid) for a in atoms])
    noise = sample_squeezed_noise(G, 0.3, grid, dual.times, 1, np.arange(5))
    gen = squeezed_generator_terms(noise, dual, h_a, 10)
    assert gen.shape == (5, 4, 4)
