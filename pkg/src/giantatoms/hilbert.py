"""Two-qubit algebra in the fixed product basis ``|ee>, |eg>, |ge>, |gg>``.

The first tensor factor is atom ``a``, the second atom ``b``.  Single-qubit
ordering is ``(e, g)`` so that ``sigma_minus = |g><e|``.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidStateError

BASIS_LABELS = ("ee", "eg", "ge", "gg")
ATOMS = ("a", "b")

_SM = np.array([[0, 0], [1, 0]], dtype=complex)
_SZ = np.diag([1.0, -1.0]).astype(complex)
_SY = np.array([[0, -1j], [1j, 0]])
_I2 = np.eye(2, dtype=complex)

SIGMA_MINUS = {"a": np.kron(_SM, _I2), "b": np.kron(_I2, _SM)}
SIGMA_PLUS = {mu: op.conj().T for mu, op in SIGMA_MINUS.items()}
SIGMA_Z = {"a": np.kron(_SZ, _I2), "b": np.kron(_I2, _SZ)}
NUMBER = {mu: SIGMA_PLUS[mu] @ SIGMA_MINUS[mu] for mu in ATOMS}
SWAP = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
SPIN_FLIP = np.kron(_SY, _SY)

for _op in (*SIGMA_MINUS.values(), *SIGMA_PLUS.values(), *SIGMA_Z.values()):
    _op.setflags(write=False)

KETS = {label: np.eye(4, dtype=complex)[i] for i, label in enumerate(BASIS_LABELS)}


def other(mu: str) -> str:
    return "b" if mu == "a" else "a"


def atom_hamiltonian(omega_a: float, omega_b: float) -> np.ndarray:
    """``H_A = omega_a n_a + omega_b n_b``."""
    return omega_a * NUMBER["a"] + omega_b * NUMBER["b"]


def lowering_basis(mu: str) -> list[np.ndarray]:
    """The four operators spanning the noise-free O_mu.

    Order: ``sigma_mu^-``, ``sigma_mu^z sigma_nu^-``, ``sigma_nu^-``,
    ``sigma_nu^z sigma_mu^-``.
    """
    nu = other(mu)
    return [
        SIGMA_MINUS[mu],
        SIGMA_Z[mu] @ SIGMA_MINUS[nu],
        SIGMA_MINUS[nu],
        SIGMA_Z[nu] @ SIGMA_MINUS[mu],
    ]


def project_lowering(op: np.ndarray, mu: str) -> tuple[np.ndarray, float]:
    """Least-squares coefficients of ``op`` on :func:`lowering_basis` and the residual norm.

    Works on stacks of operators (``op[..., 4, 4]``); returns coefficients
    with shape ``op.shape[:-2] + (4,)``.
    """
    basis = np.stack([b.ravel() for b in lowering_basis(mu)], axis=1)  # (16, 4)
    flat = op.reshape(*op.shape[:-2], 16)
    # the basis operators have disjoint supports with unit entries pairwise,
    # so the Gram matrix is 2*I and the pseudo-inverse is basis^H / 2
    coeffs = flat @ basis.conj() / 2.0
    resid = flat - coeffs @ basis.T
    return coeffs, float(np.max(np.abs(resid))) if resid.size else 0.0


def ket(spec) -> np.ndarray:
    """Build an initial state vector from a label or explicit amplitudes.

    Labels: ``ee, eg, ge, gg, bell+, bell-``.  ``bell+`` is
    ``(|eg> + |ge>)/sqrt(2)``.
    """
    if isinstance(spec, str):
        if spec in KETS:
            return KETS[spec].copy()
        if spec in ("bell+", "bell-"):
            sign = 1.0 if spec == "bell+" else -1.0
            return (KETS["eg"] + sign * KETS["ge"]) / np.sqrt(2.0)
        raise InvalidStateError(f"unknown state label {spec!r}")
    vec = np.asarray(spec, dtype=complex).reshape(-1)
    if vec.shape != (4,) or not np.all(np.isfinite(vec)):
        raise InvalidStateError("state vector must have 4 finite components")
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise InvalidStateError("state vector has zero norm")
    return vec / norm


def projector(psi: np.ndarray) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def check_density_matrix(rho, herm_tol: float = 1e-8) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError(f"expected a 4x4 density matrix, got shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise InvalidStateError("density matrix contains NaN or inf")
    dev = np.max(np.abs(rho - rho.conj().T))
    if dev > herm_tol:
        raise InvalidStateError(f"density matrix is not Hermitian (max deviation {dev:.3g})")
    return rho


def concurrence(rho, herm_tol: float = 1e-8, trace_tol: float = 1e-6) -> float:
    """Wootters concurrence of a two-qubit state.

    Slightly negative eigenvalues (Monte Carlo estimates) are clipped to zero
    before the spin-flip construction.
    """
    rho = check_density_matrix(rho, herm_tol)
    tr = np.trace(rho).real
    if abs(tr - 1.0) > trace_tol:
        raise InvalidStateError(f"trace {tr:.8f} differs from 1 by more than {trace_tol}")
    herm = 0.5 * (rho + rho.conj().T)
    evals, evecs = np.linalg.eigh(herm)
    root = (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.conj().T
    flipped = SPIN_FLIP @ herm.conj() @ SPIN_FLIP
    r = root @ flipped @ root
    lam = np.sqrt(np.clip(np.linalg.eigvalsh(0.5 * (r + r.conj().T)), 0.0, None))[::-1]
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def populations(rho) -> dict[str, float]:
    rho = np.asarray(rho, dtype=complex)
    diag = np.real(np.diagonal(rho))
    return {f"P_{label}": float(diag[i]) for i, label in enumerate(BASIS_LABELS)}


def trace_distance(a, b) -> float:
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape != b.shape:
        raise InvalidStateError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(0.5 * np.sum(np.linalg.svd(a - b, compute_uv=False)))


def swap_atoms(rho) -> np.ndarray:
    return SWAP @ np.asarray(rho, dtype=complex) @ SWAP


def local_phase(theta_a: float, theta_b: float) -> np.ndarray:
    """``exp(i theta_a sz_a) exp(i theta_b sz_b)`` (diagonal)."""
    return np.diag(np.exp(1j * (theta_a * np.diag(SIGMA_Z["a"]).real + theta_b * np.diag(SIGMA_Z["b"]).real)))
