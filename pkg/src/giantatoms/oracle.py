"""Dressed-state wavefunction solvers in fixed excitation sectors.

The interaction is ``sum_mu,k (G_mu k sigma_mu^+ c_k + G*_mu k sigma_mu^- c_k^dag)``
on the same mode grid and couplings used by the kernel and noise modules,
so these solvers are exact references for the discretized bath.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import ModeGrid
from .dynamics import DensitySeries
from .errors import ConfigurationError, IntegratorError, InvalidStateError, MemoryCapError
from .hilbert import ket

NORM_DRIFT_LIMIT = 1e-6
DEFAULT_PAIR_CAP = 4_000_000


def _rk4(f, y0: np.ndarray, dt: float, n_t: int, observe) -> None:
    y = y0
    observe(0, y)
    for i in range(n_t - 1):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        observe(i + 1, y)


def _n_steps(dt: float, t_max: float) -> int:
    n = t_max / dt
    if abs(n - round(n)) > 1e-6:
        raise ConfigurationError(f"t_max={t_max} is not a multiple of dt={dt}")
    return int(round(n)) + 1


@dataclass
class SingleExcitationResult:
    times: np.ndarray
    A: np.ndarray  # (n_t, 2)
    photon_population: np.ndarray  # (n_t,)
    norm: np.ndarray
    density: DensitySeries


def single_excitation_amplitudes(initial) -> np.ndarray:
    """Atomic amplitudes ``(A_a, A_b)`` of a state in the one-excitation sector."""
    vec = ket(initial) if isinstance(initial, str) else np.asarray(initial, dtype=complex).reshape(-1)
    if vec.shape == (2,):
        vec = np.array([0, vec[0], vec[1], 0], dtype=complex)
    if vec.shape != (4,):
        raise InvalidStateError("initial state must be a label, 2 atomic amplitudes or a 4-vector")
    if abs(vec[0]) > 1e-12 or abs(vec[3]) > 1e-12:
        raise InvalidStateError("single-excitation solver needs an initial state in span{|eg>, |ge>}")
    amp = vec[1:3]
    return amp / np.linalg.norm(amp)


def solve_single_excitation(G, grid: ModeGrid, omega_a: float, omega_b: float, initial, dt: float, t_max: float) -> SingleExcitationResult:
    """RK4 on ``i dA_mu/dt = w_mu A_mu + sum_k G_mu k B_k``, ``i dB_k/dt = w_k B_k + sum_mu G*_mu k A_mu``."""
    g = np.asarray(G, dtype=complex)
    if g.shape != (2, grid.n):
        raise ConfigurationError(f"couplings must have shape (2, {grid.n})")
    n_t = _n_steps(dt, t_max)
    w_atoms = np.array([omega_a, omega_b], dtype=float)
    w_modes = np.asarray(grid.omega, dtype=float)

    def f(y):
        a, b = y[:2], y[2:]
        da = w_atoms * a + g @ b
        db = w_modes * b + g.conj().T @ a
        return -1j * np.concatenate([da, db])

    y0 = np.zeros(2 + grid.n, dtype=complex)
    y0[:2] = single_excitation_amplitudes(initial)
    A = np.empty((n_t, 2), dtype=complex)
    photons = np.empty(n_t)

    def observe(i, y):
        A[i] = y[:2]
        photons[i] = float(np.sum(np.abs(y[2:]) ** 2))

    _rk4(f, y0, dt, n_t, observe)
    norm = np.sum(np.abs(A) ** 2, axis=1) + photons
    drift = float(np.max(np.abs(norm - 1.0)))
    if drift > NORM_DRIFT_LIMIT:
        raise IntegratorError(f"norm drifted by {drift:.3g}; reduce dt")
    rho = np.zeros((n_t, 4, 4), dtype=complex)
    rho[:, 1, 1] = np.abs(A[:, 0]) ** 2
    rho[:, 2, 2] = np.abs(A[:, 1]) ** 2
    rho[:, 1, 2] = A[:, 0] * A[:, 1].conj()
    rho[:, 2, 1] = rho[:, 1, 2].conj()
    rho[:, 3, 3] = photons
    times = dt * np.arange(n_t)
    return SingleExcitationResult(times, A, photons, norm, DensitySeries(times, rho, meta={"kind": "dressed1"}))


@dataclass
class DoubleExcitationResult:
    times: np.ndarray
    C: np.ndarray  # (n_t,) amplitude of |ee, vac>
    B_weight: np.ndarray  # (n_t, 2) sum_k |B_mu k|^2
    A_weight: np.ndarray  # (n_t,) 2 sum |A_kk'|^2
    norm: np.ndarray
    density: DensitySeries
    final_B: np.ndarray
    final_A: np.ndarray


def solve_double_excitation(
    G,
    grid: ModeGrid,
    omega_a: float,
    omega_b: float,
    dt: float,
    t_max: float,
    pair_cap: int = DEFAULT_PAIR_CAP,
) -> DoubleExcitationResult:
    """Two-excitation sector from ``|ee>``.

    Amplitudes: ``C`` on ``|ee, 0>``, ``B[mu, k]`` on ``sigma_mu^+ c_k^dag |gg, 0>``
    and a symmetric ``A[k, k']`` on ``c_k^dag c_k'^dag |gg, 0>``::

        i dC/dt     = (w_a + w_b) C + sum_k (G_ak B_bk + G_bk B_ak)
        i dB_mu k/dt = (w_mu + w_k) B_mu k + G*_nu k C + 2 sum_q G_mu q A_qk
        i dA_qk/dt  = (w_q + w_k) A_qk + (1/2) sum_mu (G*_mu q B_mu k + G*_mu k B_mu q)

    The norm is ``|C|^2 + sum |B|^2 + 2 sum |A|^2``.
    """
    g = np.asarray(G, dtype=complex)
    n = grid.n
    if g.shape != (2, n):
        raise ConfigurationError(f"couplings must have shape (2, {n})")
    if n * n > pair_cap:
        raise MemoryCapError(f"{n}^2 = {n * n} two-photon amplitudes exceed the cap {pair_cap}; use fewer modes")
    n_t = _n_steps(dt, t_max)
    w = np.asarray(grid.omega, dtype=float)
    w_atoms = np.array([omega_a, omega_b], dtype=float)
    w_pair = w[:, None] + w[None, :]
    gs = g.conj()

    def f(y):
        C, B, A = y
        dC = (omega_a + omega_b) * C + np.sum(g[0] * B[1] + g[1] * B[0])
        dB = (w_atoms[:, None] + w[None, :]) * B + gs[::-1] * C + 2.0 * (g @ A)
        half = gs.T @ B  # (q, k): sum_mu G*_mu q B_mu k
        dA = w_pair * A + 0.5 * (half + half.T)
        return (-1j * dC, -1j * dB, -1j * dA)

    class _State(tuple):
        def __add__(self, other):
            return _State(x + y for x, y in zip(self, other))

        def __mul__(self, s):
            return _State(x * s for x in self)

        __rmul__ = __mul__

    def fs(y):
        return _State(f(y))

    y0 = _State((np.complex128(1.0), np.zeros((2, n), dtype=complex), np.zeros((n, n), dtype=complex)))
    C = np.empty(n_t, dtype=complex)
    Bw = np.empty((n_t, 2))
    Aw = np.empty(n_t)
    coh = np.empty(n_t, dtype=complex)
    last = {}

    def observe(i, y):
        c, b, a = y
        C[i] = c
        Bw[i] = np.sum(np.abs(b) ** 2, axis=1)
        Aw[i] = 2.0 * float(np.sum(np.abs(a) ** 2))
        coh[i] = np.sum(b[0] * b[1].conj())
        last["y"] = y

    _rk4(fs, y0, dt, n_t, observe)
    norm = np.abs(C) ** 2 + Bw.sum(axis=1) + Aw
    drift = float(np.max(np.abs(norm - 1.0)))
    if drift > NORM_DRIFT_LIMIT:
        raise IntegratorError(f"norm drifted by {drift:.3g}; reduce dt")
    rho = np.zeros((n_t, 4, 4), dtype=complex)
    rho[:, 0, 0] = np.abs(C) ** 2
    rho[:, 1, 1] = Bw[:, 0]
    rho[:, 2, 2] = Bw[:, 1]
    rho[:, 1, 2] = coh
    rho[:, 2, 1] = coh.conj()
    rho[:, 3, 3] = Aw
    times = dt * np.arange(n_t)
    _, b_fin, a_fin = last["y"]
    return DoubleExcitationResult(times, C, Bw, Aw, norm, DensitySeries(times, rho, meta={"kind": "dressed2"}), b_fin, a_fin)


def short_time_loss_rate(G) -> float:
    """Coefficient ``c`` in ``|C(t)|^2 = 1 - c t^2 + O(t^4)`` from ``|ee>``."""
    return float(np.sum(np.abs(np.asarray(G)) ** 2))
