"""Finite-temperature and squeezed-vacuum baths.

Thermal baths are mapped to an effective vacuum with two independent
noises: ``z`` couples through ``sigma^-`` with kernel ``alpha`` (weights
``n + 1``) and ``w`` couples through ``sigma^+`` with kernel ``alpha'``
(weights ``n``).  The trajectory generator is::

    -i H_A + sum_mu [sigma_mu^- z*_mu + sigma_mu^+ w*_mu
                     - sigma_mu^+ Obar_z,mu - sigma_mu^- Obar_w,mu]

Squeezed baths use one draw for both noises.  The ``w`` field lives on
``s in [-t, 0]`` and is stored reflected, ``u = -s``, so ``O_w(t, u)`` starts
from ``sigma^+`` at ``u = t`` and its convolution probes ``beta(t + u)``.
This propagation path is experimental.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlation import SqueezedKernelPair, ThermalKernelPair
from .coupling import ModeGrid
from .dynamics import DensitySeries, _as_density, _as_vector, integrate_linear, integrate_master, liouvillian, evolve_liouvillian, run_ensemble
from .errors import ConfigurationError
from .hilbert import ATOMS, SIGMA_MINUS, SIGMA_PLUS, atom_hamiltonian
from .noise import NoiseRealization, sample_squeezed_noise, sample_thermal_noise
from .osolver import Channel, OField, march, vacuum_channel, _check_kernel_grid, _window_rows

_LOWER = np.stack([SIGMA_MINUS[m] for m in ATOMS])
_RAISE = np.stack([SIGMA_PLUS[m] for m in ATOMS])


@dataclass(frozen=True)
class DualOField:
    """The ``z``-driven and ``w``-driven effective-operator fields of one bath."""

    oz: OField
    ow: OField
    kind: str

    @property
    def obar_z(self) -> np.ndarray:
        return self.oz.obar

    @property
    def obar_w(self) -> np.ndarray:
        return self.ow.obar

    @property
    def dt(self) -> float:
        return self.oz.dt

    @property
    def n_t(self) -> int:
        return self.oz.n_t

    @property
    def times(self) -> np.ndarray:
        return self.oz.times


def _split(obar, column, rows, dt, window) -> tuple[OField, OField]:
    fields = []
    for c in range(2):
        r = [row[c] for row in rows] if rows is not None else None
        fields.append(OField(dt, obar[c], column[c], r, window))
    return fields[0], fields[1]


def evolve_dual_field_thermal(pair: ThermalKernelPair, h_a: np.ndarray, dt: float, t_max: float, store: bool = False, window="auto") -> DualOField:
    """Joint march of ``O_z`` (from ``sigma^-``) and ``O_w`` (from ``sigma^+``)."""
    n_t = _check_kernel_grid(pair.alpha, dt, t_max)
    _check_kernel_grid(pair.alpha_prime, dt, t_max)
    if window == "auto":
        wz, ww = _window_rows(pair.alpha, 1e-6), _window_rows(pair.alpha_prime, 1e-6)
        window = None if wz is None or ww is None else max(wz, ww)
    zc = vacuum_channel(pair.alpha)
    wc = Channel(pair.alpha_prime.values, pair.alpha_prime.delta, _RAISE, _LOWER)
    obar, column, rows = march([zc, wc], h_a, dt, n_t, window, store)
    oz, ow = _split(obar, column, rows, dt, window)
    return DualOField(oz, ow, "thermal")


def thermal_drift(dual: DualOField, h_a: np.ndarray) -> np.ndarray:
    return (
        -1j * np.asarray(h_a)[None]
        - np.einsum("mab,tmbc->tac", _RAISE, dual.obar_z)
        - np.einsum("mab,tmbc->tac", _LOWER, dual.obar_w)
    )


def thermal_master_solve(initial, dual: DualOField, h_a: np.ndarray, dt: float, t_max: float) -> DensitySeries:
    """``d rho/dt = -i[H_A, rho] + sum ([s^-, rho Oz^dag] + [s^+, rho Ow^dag] + h.c.)``."""
    if dual.kind != "thermal":
        raise ConfigurationError("thermal master equation needs a thermal dual field")
    if abs(dt - dual.dt) > 1e-12:
        raise ConfigurationError("master equation step must match the O-field step")
    n_t = int(round(t_max / dt)) + 1
    if n_t > dual.n_t:
        raise ConfigurationError(f"O-field covers t <= {dual.oz.t_max}, need {t_max}")
    terms = [(_LOWER, dual.obar_z[:n_t]), (_RAISE, dual.obar_w[:n_t])]
    rho = integrate_master(_as_density(initial), h_a, terms, dt, n_t)
    return DensitySeries(dt * np.arange(n_t), rho, meta={"kind": "thermal-master"})


def thermal_couplings(G, occupation: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``F = sqrt(n + 1) G`` and ``H = sqrt(n) G``."""
    g = np.asarray(G, dtype=complex)
    return g * np.sqrt(occupation + 1.0), g * np.sqrt(occupation)


def thermal_ensemble(
    initial,
    dual: DualOField,
    pair: ThermalKernelPair,
    h_a: np.ndarray,
    G,
    grid: ModeGrid,
    n_traj: int,
    seed: int,
    batch_size: int = 256,
    workers: int = 1,
) -> DensitySeries:
    psi0 = _as_vector(initial)
    drift = thermal_drift(dual, h_a)
    F, Hc = thermal_couplings(G, pair.occupation)

    def runner(idx):
        noise = sample_thermal_noise(F, Hc, grid, dual.times, seed, idx)
        return integrate_linear(np.broadcast_to(psi0, (idx.size, 4)), drift, [(noise.z_star, _LOWER), (noise.w_star, _RAISE)], dual.dt)

    return run_ensemble(n_traj, seed, dual.n_t, dual.dt, runner, batch_size, workers, {"kind": "thermal-sse", "beta": pair.beta})


def thermal_lindblad_solve(gamma, occupation: float, initial, dt: float, t_max: float, omega_a: float = 1.0, omega_b: float = 1.0) -> DensitySeries:
    """Independent-atom Markov reference ``(n+1) gamma D[s^-] + n gamma D[s^+]``.

    ``gamma`` is a pair of per-atom rates; a zero rate leaves that atom free.
    """
    g = np.broadcast_to(np.asarray(gamma, dtype=float), (2,))
    jumps = []
    for rate, mu in zip(g, ATOMS):
        if rate > 0:
            jumps.append(np.sqrt((occupation + 1) * rate) * SIGMA_MINUS[mu])
            jumps.append(np.sqrt(occupation * rate) * SIGMA_PLUS[mu])
    n_t = int(round(t_max / dt)) + 1
    L = liouvillian(atom_hamiltonian(omega_a, omega_b), jumps)
    rho = evolve_liouvillian(L, _as_density(initial), dt, n_t)
    return DensitySeries(dt * np.arange(n_t), rho, meta={"kind": "thermal-lindblad"})


def thermal_excitation(gamma: float, occupation: float, t) -> np.ndarray:
    """Excited population of one atom starting in ``|g>`` under the Markov thermal bath."""
    n = occupation
    return n / (2 * n + 1) * (1 - np.exp(-(2 * n + 1) * gamma * np.asarray(t, dtype=float)))


# ---- squeezed vacuum --------------------------------------------------------


def evolve_dual_field_squeezed(pair: SqueezedKernelPair, h_a: np.ndarray, dt: float, t_max: float, store: bool = False) -> DualOField:
    """``O_z`` with kernel ``alpha`` and reflected ``O_w`` with kernel ``-beta``.

    Both fields enter the generator as ``-sigma^+ (Obar_z + Obar_w)``.
    """
    n_t = _check_kernel_grid(pair.alpha, dt, t_max)
    if pair.beta.n_tau < 2 * (n_t - 1) + 1:
        raise ConfigurationError("beta kernel must be tabulated to twice the horizon")
    zc = vacuum_channel(pair.alpha)
    wc = Channel(-pair.beta.values, -pair.beta.delta, _RAISE, _RAISE, reflected=True)
    obar, column, rows = march([zc, wc], h_a, dt, n_t, None, store)
    oz, ow = _split(obar, column, rows, dt, None)
    return DualOField(oz, ow, "squeezed")


def squeezed_drift(dual: DualOField, h_a: np.ndarray) -> np.ndarray:
    return -1j * np.asarray(h_a)[None] - np.einsum("mab,tmbc->tac", _RAISE, dual.obar_z + dual.obar_w)


def squeezed_generator_terms(noise: NoiseRealization, dual: DualOField, h_a: np.ndarray, i: int) -> np.ndarray:
    """Per-trajectory generator at grid index ``i``, shape ``(n_traj, 4, 4)``.

    ``-i H_A + sum_mu [z*_mu sigma_mu^- + w*_mu(-t) sigma_mu^+ - sigma_mu^+ (Obar_z + Obar_w)]``.
    """
    if dual.kind != "squeezed":
        raise ConfigurationError("squeezed generator needs a squeezed dual field")
    if noise.w_star is None:
        raise ConfigurationError("squeezed generator needs the w noise")
    if noise.times.size != dual.n_t:
        raise ConfigurationError("noise and field grids differ")
    base = squeezed_drift(dual, h_a)[i]
    z = noise.z_star[:, :, i]
    w = noise.w_star[:, :, i]
    return base[None] + np.einsum("nm,mab->nab", z, _LOWER) + np.einsum("nm,mab->nab", w, _RAISE)


def squeezed_ensemble(
    initial,
    dual: DualOField,
    pair: SqueezedKernelPair,
    h_a: np.ndarray,
    G,
    grid: ModeGrid,
    n_traj: int,
    seed: int,
    measure: str = "squeezed",
    batch_size: int = 256,
    workers: int = 1,
) -> DensitySeries:
    """Average normalized squeezed-bath trajectories (experimental)."""
    psi0 = _as_vector(initial)
    drift = squeezed_drift(dual, h_a)

    def runner(idx):
        noise = sample_squeezed_noise(G, pair.r, grid, dual.times, seed, idx, measure)
        return integrate_linear(np.broadcast_to(psi0, (idx.size, 4)), drift, [(noise.z_star, _LOWER), (noise.w_star, _RAISE)], dual.dt)

    return run_ensemble(n_traj, seed, dual.n_t, dual.dt, runner, batch_size, workers, {"kind": "squeezed-sse", "measure": measure})
