"""Dressed-state solvers checked against closed forms and brute force."""

import itertools

import numpy as np
import pytest
from scipy.linalg import expm

from giantatoms.coupling import Comb, build_mode_grid, fourier_coupling
from giantatoms.errors import ConfigurationError, InvalidStateError, MemoryCapError
from giantatoms.oracle import (
    single_excitation_amplitudes,
    short_time_loss_rate,
    solve_double_excitation,
    solve_single_excitation,
)


def test_no_coupling_keeps_free_phase():
    grid = build_mode_grid(2.0, 20, 2.0)
    G = np.zeros((2, grid.n), dtype=complex)
    res = solve_single_excitation(G, grid, 1.0, 1.3, [1, 1j], 0.01, 2.0)
    t = res.times
    np.testing.assert_allclose(res.A[:, 0], np.exp(-1j * t) / np.sqrt(2), atol=1e-9)
    np.testing.assert_allclose(res.A[:, 1], 1j * np.exp(-1.3j * t) / np.sqrt(2), atol=1e-9)
    assert np.all(res.photon_population < 1e-20)


def test_single_mode_vacuum_rabi():
    # one atom coupled to the k = -1 mode only (omega = 0), both at zero frequency
    grid = build_mode_grid(1.0, 2, 1.0, dispersion="band", omega_c=1.0)
    g = 0.3
    G = np.zeros((2, 2), dtype=complex)
    G[0, 0] = g
    res = solve_single_excitation(G, grid, 0.0, 0.0, "eg", 0.001, 1.0)
    np.testing.assert_allclose(np.abs(res.A[:, 0]) ** 2, np.cos(g * res.times) ** 2, atol=1e-9)
    np.testing.assert_allclose(res.norm, 1.0, atol=1e-10)


def test_single_excitation_matches_matrix_exponential(standard):
    grid, G = standard["grid"], standard["G"]
    res = solve_single_excitation(G, grid, 1.0, 1.0, "eg", 0.01, 2.0)
    n = grid.n
    H = np.zeros((2 + n, 2 + n), dtype=complex)
    H[0, 0] = H[1, 1] = 1.0
    H[2:, 2:] = np.diag(grid.omega)
    H[:2, 2:] = G
    H[2:, :2] = G.conj().T
    y = np.zeros(2 + n, dtype=complex)
    y[0] = 1.0
    exact = expm(-1j * H * 2.0) @ y
    np.testing.assert_allclose(res.A[-1], exact[:2], atol=1e-8)


def test_single_excitation_rejects_other_sectors():
    with pytest.raises(InvalidStateError):
        single_excitation_amplitudes("ee")
    with pytest.raises(InvalidStateError):
        single_excitation_amplitudes([1, 0, 0, 1])


def _brute_two_excitation(G, omega, wa, wb, t):
    """Full Fock-space evolution restricted to two excitations, built independently."""
    n = omega.size
    basis = [("C",)]
    basis += [("B", m, k) for m in range(2) for k in range(n)]
    basis += [("A", q, k) for q, k in itertools.combinations_with_replacement(range(n), 2)]
    index = {b: i for i, b in enumerate(basis)}
    H = np.zeros((len(basis), len(basis)), dtype=complex)
    w_atoms = (wa, wb)
    H[0, 0] = wa + wb
    for m, k in itertools.product(range(2), range(n)):
        i = index[("B", m, k)]
        H[i, i] = w_atoms[m] + omega[k]
        # sigma_nu^- c_k^dag |ee> lands on B[m, k] where m is the atom left excited
        H[i, 0] = G[1 - m, k].conj()
        H[0, i] = G[1 - m, k]
        for q in range(n):
            key = ("A", min(q, k), max(q, k))
            j = index[key]
            amp = G[m, q].conj() * (np.sqrt(2.0) if q == k else 1.0)
            H[j, i] += amp
            H[i, j] += np.conj(amp)
    for q, k in itertools.combinations_with_replacement(range(n), 2):
        j = index[("A", q, k)]
        H[j, j] = omega[q] + omega[k]
    y = np.zeros(len(basis), dtype=complex)
    y[0] = 1.0
    return (expm(-1j * H * t) @ y)[0]


def test_double_excitation_matches_brute_force():
    grid = build_mode_grid(3.0, 12, 2.0)
    a, b = Comb((0.0, 1.0), 0.8), Comb((2.0,), 0.6)
    G = np.stack([fourier_coupling(a, grid), fourier_coupling(b, grid)])
    res = solve_double_excitation(G, grid, 1.0, 1.2, 0.002, 2.0)
    exact = _brute_two_excitation(G, grid.omega, 1.0, 1.2, 2.0)
    assert abs(res.C[-1] - exact) < 1e-8
    np.testing.assert_allclose(res.norm, 1.0, atol=1e-9)


def test_double_excitation_short_time_law():
    grid = build_mode_grid(4.0, 100, 1.0)
    a, b = Comb((0.0,), 0.5), Comb((1.0,), 0.5)
    G = np.stack([fourier_coupling(a, grid), fourier_coupling(b, grid)])
    res = solve_double_excitation(G, grid, 1.0, 1.0, 0.001, 0.02)
    c = short_time_loss_rate(G)
    loss = 1 - np.abs(res.C[1:]) ** 2
    np.testing.assert_allclose(loss / (c * res.times[1:] ** 2), 1.0, atol=2e-3)


def test_double_excitation_density_is_valid():
    grid = build_mode_grid(4.0, 60, 2.0)
    a, b = Comb((0.0,), 0.5), Comb((0.5,), 0.5)
    G = np.stack([fourier_coupling(a, grid), fourier_coupling(b, grid)])
    res = solve_double_excitation(G, grid, 1.0, 1.0, 0.005, 2.0)
    rho = res.density.rho
    np.testing.assert_allclose(np.trace(rho, axis1=1, axis2=2).real, 1.0, atol=1e-8)
    for r in rho[::40]:
        assert np.linalg.eigvalsh(r).min() > -1e-10


def test_double_excitation_memory_cap():
    grid = build_mode_grid(4.0, 100, 1.0)
    G = np.zeros((2, grid.n), dtype=complex)
    with pytest.raises(MemoryCapError):
        solve_double_excitation(G, grid, 1.0, 1.0, 0.01, 1.0, pair_cap=5000)


def test_shape_checks():
    grid = build_mode_grid(4.0, 10, 1.0)
    with pytest.raises(ConfigurationError):
        solve_single_excitation(np.zeros((2, 3)), grid, 1, 1, "eg", 0.01, 1.0)
    with pytest.raises(ConfigurationError):
        solve_double_excitation(np.zeros((2, grid.n)), grid, 1, 1, 0.03, 1.0)
