import numpy as np
import pytest

from giantatoms.coupling import Comb, build_mode_grid, fourier_coupling
from giantatoms.hilbert import atom_hamiltonian

G0 = 1 / np.sqrt(2)


@pytest.fixture(scope="session")
def h_a():
    return atom_hamiltonian(1.0, 1.0)


@pytest.fixture(scope="session")
def standard():
    """Two-point combs a = {0, 1.5}, b = {4, 5.5} on the linear grid used throughout."""
    t_max, dt = 10.0, 0.01
    grid = build_mode_grid(10.0, 128, t_max)
    a, b = Comb((0.0, 1.5), G0), Comb((4.0, 5.5), G0)
    G = np.stack([fourier_coupling(a, grid), fourier_coupling(b, grid)])
    return {"grid": grid, "dists": (a, b), "G": G, "dt": dt, "t_max": t_max}


def random_density(rng, rank=4):
    m = rng.normal(size=(4, rank)) + 1j * rng.normal(size=(4, rank))
    rho = m @ m.conj().T
    return rho / np.trace(rho).real
