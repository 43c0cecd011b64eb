import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_density
from giantatoms.errors import InvalidStateError
from giantatoms.hilbert import (
    SIGMA_MINUS,
    SIGMA_PLUS,
    atom_hamiltonian,
    concurrence,
    ket,
    local_phase,
    lowering_basis,
    project_lowering,
    projector,
    swap_atoms,
    trace_distance,
)


def test_lowering_acts_on_basis():
    # sigma_a^- |eg> = |gg>, sigma_b^- |eg> = 0
    assert np.allclose(SIGMA_MINUS["a"] @ ket("eg"), ket("gg"))
    assert np.allclose(SIGMA_MINUS["b"] @ ket("eg"), 0)
    assert np.allclose(SIGMA_PLUS["b"] @ ket("eg"), ket("ee"))


def test_hamiltonian_diagonal():
    np.testing.assert_allclose(np.diag(atom_hamiltonian(1.0, 2.0)).real, [3.0, 1.0, 2.0, 0.0])


@pytest.mark.parametrize("label,expected", [("bell+", 1.0), ("bell-", 1.0), ("eg", 0.0), ("ee", 0.0), ("gg", 0.0)])
def test_concurrence_of_pure_states(label, expected):
    assert concurrence(projector(ket(label))) == pytest.approx(expected, abs=1e-12)


def test_concurrence_of_werner_state():
    bell = projector(ket("bell+"))
    for p in (0.2, 0.5, 0.9):
        rho = p * bell + (1 - p) * np.eye(4) / 4
        assert concurrence(rho) == pytest.approx(max(0.0, (3 * p - 1) / 2), abs=1e-10)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), ta=st.floats(-3, 3), tb=st.floats(-3, 3))
def test_concurrence_invariances(seed, ta, tb):
    rho = random_density(np.random.default_rng(seed), rank=2)
    c = concurrence(rho)
    assert 0.0 <= c <= 1.0
    assert concurrence(swap_atoms(rho)) == pytest.approx(c, abs=1e-6)
    u = local_phase(ta, tb)
    # sqrt of near-zero eigenvalues amplifies rounding
    assert concurrence(u @ rho @ u.conj().T) == pytest.approx(c, abs=1e-6)


def test_concurrence_clips_small_negative_eigenvalues():
    rho = projector(ket("bell+")) * (1 + 1e-9) - 1e-9 * np.eye(4) / 4
    rho /= np.trace(rho).real
    assert np.isfinite(concurrence(rho))


def test_concurrence_rejects_bad_input():
    with pytest.raises(InvalidStateError):
        concurrence(np.eye(4))  # trace 4
    bad = np.eye(4, dtype=complex) / 4
    bad[0, 1] = 0.1
    with pytest.raises(InvalidStateError):
        concurrence(bad)
    with pytest.raises(InvalidStateError):
        concurrence(np.full((4, 4), np.nan))


def test_ket_labels_and_vectors():
    assert np.allclose(ket([2, 0, 0, 0]), ket("ee"))
    with pytest.raises(InvalidStateError):
        ket("xy")
    with pytest.raises(InvalidStateError):
        ket([0, 0, 0, 0])


def test_projection_onto_lowering_span():
    rng = np.random.default_rng(3)
    coeffs = rng.normal(size=4) + 1j * rng.normal(size=4)
    op = sum(c * b for c, b in zip(coeffs, lowering_basis("a")))
    found, resid = project_lowering(op, "a")
    np.testing.assert_allclose(found, coeffs, atol=1e-12)
    assert resid < 1e-12
    _, resid = project_lowering(SIGMA_PLUS["a"], "a")
    assert resid > 0.5


@settings(max_examples=30, deadline=None)
@given(s1=st.integers(0, 10_000), s2=st.integers(0, 10_000))
def test_trace_distance_is_a_metric(s1, s2):
    rng = np.random.default_rng(s1)
    a, b = random_density(rng), random_density(np.random.default_rng(s2 + 20_000))
    d = trace_distance(a, b)
    assert 0 <= d <= 1 + 1e-12
    assert trace_distance(a, a) < 1e-12
    assert d == pytest.approx(trace_distance(b, a))
