"""Trajectory propagation, ensemble averaging and master-equation integration."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .coupling import ModeGrid
from .errors import ConfigurationError, IntegratorError, InvalidStateError
from .hilbert import ATOMS, BASIS_LABELS, SIGMA_MINUS, SIGMA_PLUS, concurrence, ket, projector
from .noise import NoiseRealization, sample_vacuum_noise
from .osolver import OField

log = logging.getLogger(__name__)

MAX_EXCLUDED_FRACTION = 1e-3
TRACE_DRIFT_LIMIT = 1e-6

_LOWER = np.stack([SIGMA_MINUS[m] for m in ATOMS])
_RAISE = np.stack([SIGMA_PLUS[m] for m in ATOMS])


@dataclass
class DensitySeries:
    """Density matrices on a uniform time grid, optionally with Monte Carlo error bars.

    ``stderr[i]`` holds the per-entry standard error of ``rho[i]`` (modulus
    of the complex fluctuation).  ``trace_se`` is the standard error of the
    trace estimate.
    """

    times: np.ndarray
    rho: np.ndarray
    stderr: np.ndarray | None = None
    trace_se: np.ndarray | None = None
    n_traj: int | None = None
    excluded: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def trace(self) -> np.ndarray:
        return np.real(np.trace(self.rho, axis1=1, axis2=2))

    def normalized(self) -> np.ndarray:
        return self.rho / self.trace[:, None, None]

    def populations(self) -> np.ndarray:
        """Columns ``P_ee, P_eg, P_ge, P_gg``."""
        return np.real(np.diagonal(self.rho, axis1=1, axis2=2))

    def concurrence(self) -> np.ndarray:
        """Concurrence of the trace-normalized state at each time."""
        out = np.empty(self.times.size)
        for i, r in enumerate(self.normalized()):
            herm = 0.5 * (r + r.conj().T)
            out[i] = concurrence(herm)
        return out

    def at(self, t: float) -> np.ndarray:
        i = int(round(t / (self.times[1] - self.times[0]))) if self.times.size > 1 else 0
        return self.rho[i]

    def to_csv(self, path: str | Path) -> None:
        """Write populations, coherences, concurrence, trace and error bars per time."""
        pairs = [(i, j) for i in range(4) for j in range(i + 1, 4)]
        header = ["omega_t"] + [f"P_{l}" for l in BASIS_LABELS]
        for i, j in pairs:
            header += [f"re_rho_{BASIS_LABELS[i]}_{BASIS_LABELS[j]}", f"im_rho_{BASIS_LABELS[i]}_{BASIS_LABELS[j]}"]
        header += ["concurrence", "trace"]
        if self.stderr is not None:
            header += [f"se_P_{l}" for l in BASIS_LABELS]
            header += [f"se_rho_{BASIS_LABELS[i]}_{BASIS_LABELS[j]}" for i, j in pairs]
            header += ["se_trace"]
        conc = self.concurrence()
        pops = self.populations()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for n, t in enumerate(self.times):
                r = self.rho[n]
                row = [float(t), *pops[n]]
                for i, j in pairs:
                    row += [r[i, j].real, r[i, j].imag]
                row += [conc[n], self.trace[n]]
                if self.stderr is not None:
                    se = self.stderr[n]
                    row += [se[i, i] for i in range(4)]
                    row += [se[i, j] for i, j in pairs]
                    row += [self.trace_se[n]]
                writer.writerow([repr(float(v)) for v in row])


def _midpoints(arr: np.ndarray) -> np.ndarray:
    """Linear interpolation to half steps along axis 0."""
    return 0.5 * (arr[:-1] + arr[1:])


def integrate_linear(psi0: np.ndarray, drift: np.ndarray, drives: list[tuple[np.ndarray, np.ndarray]], dt: float) -> np.ndarray:
    """RK4 for ``d psi/dt = drift(t) psi + sum_c sum_mu x_c,mu(t) ops_c[mu] psi``.

    ``psi0`` is ``(n, 4)``; ``drift`` is ``(n_t, 4, 4)`` shared by the batch;
    each drive pairs per-trajectory amplitudes ``(n, 2, n_t)`` with two
    operators.  Half-step values are linear interpolations.  Returns
    ``(n, n_t, 4)``.
    """
    psi0 = np.atleast_2d(np.asarray(psi0, dtype=complex))
    n_t = drift.shape[0]
    out = np.empty((psi0.shape[0], n_t, 4), dtype=complex)
    out[:, 0] = psi0
    drift_mid = _midpoints(drift)
    amps = [np.moveaxis(x, -1, 0) for x, _ in drives]  # (n_t, n, 2)
    amps_mid = [_midpoints(a) for a in amps]
    opsT = [np.transpose(ops, (0, 2, 1)) for _, ops in drives]

    def rhs(psi, D, xs):
        d = psi @ D.T
        for x, oT in zip(xs, opsT):
            d += x[:, 0, None] * (psi @ oT[0]) + x[:, 1, None] * (psi @ oT[1])
        return d

    psi = psi0.copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(n_t - 1):
            x0 = [a[i] for a in amps]
            xm = [a[i] for a in amps_mid]
            x1 = [a[i + 1] for a in amps]
            k1 = rhs(psi, drift[i], x0)
            k2 = rhs(psi + 0.5 * dt * k1, drift_mid[i], xm)
            k3 = rhs(psi + 0.5 * dt * k2, drift_mid[i], xm)
            k4 = rhs(psi + dt * k3, drift[i + 1], x1)
            psi = psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
            out[:, i + 1] = psi
    return out


def vacuum_drift(ofield: OField, h_a: np.ndarray) -> np.ndarray:
    """``-i H_A - sum_mu sigma_mu^+ Obar_mu(t)`` on the field's grid."""
    return -1j * np.asarray(h_a)[None] - np.einsum("mab,tmbc->tac", _RAISE, ofield.obar)


def _check_grids(noise: NoiseRealization, n_t: int, dt: float) -> None:
    if noise.times.size != n_t:
        raise ConfigurationError(f"noise has {noise.times.size} samples, generator grid has {n_t}")
    if n_t > 1 and abs(noise.times[1] - noise.times[0] - dt) > 1e-12:
        raise ConfigurationError("noise and O-field use different time steps")


def propagate_trajectory(initial, noise: NoiseRealization, ofield: OField, h_a: np.ndarray, dt: float) -> np.ndarray:
    """Linear SSE trajectories for every realization in ``noise``.

    Returns ``(n_traj, n_t, 4)`` unnormalized state vectors.
    """
    _check_grids(noise, ofield.n_t, dt)
    psi0 = np.broadcast_to(_as_vector(initial), (noise.n_traj, 4))
    return integrate_linear(psi0, vacuum_drift(ofield, h_a), [(noise.z_star, _LOWER)], dt)


def _as_vector(initial) -> np.ndarray:
    if isinstance(initial, str):
        return ket(initial)
    vec = np.asarray(initial, dtype=complex).reshape(-1)
    if vec.shape != (4,) or not np.all(np.isfinite(vec)):
        raise InvalidStateError("initial state must be 4 finite amplitudes")
    return vec


@dataclass
class _Accumulator:
    """Running sums for mean and spread of outer products."""

    n_t: int
    total: np.ndarray = None
    second: np.ndarray = None
    norm2: np.ndarray = None
    norm4: np.ndarray = None
    count: int = 0
    excluded: int = 0
    group: int = 1

    def __post_init__(self):
        self.total = np.zeros((self.n_t, 4, 4), dtype=complex)
        self.second = np.zeros((self.n_t, 4, 4))
        self.norm2 = np.zeros(self.n_t)
        self.norm4 = np.zeros(self.n_t)

    def add(self, states: np.ndarray, group: int = 1) -> None:
        """Add trajectories; consecutive ``group`` members form one independent sample."""
        n = states.shape[0] // group
        states = states[: n * group].reshape(n, group, *states.shape[1:])
        ok = np.all(np.isfinite(states), axis=(1, 2, 3))
        self.excluded += group * int(np.count_nonzero(~ok))
        states = states[ok]
        outer = (states[..., :, None] * states[..., None, :].conj()).mean(axis=1)
        self.total += outer.sum(axis=0)
        self.second += (np.abs(outer) ** 2).sum(axis=0)
        nrm = np.sum(np.abs(states) ** 2, axis=3).mean(axis=1)
        self.norm2 += nrm.sum(axis=0)
        self.norm4 += (nrm**2).sum(axis=0)
        self.count += states.shape[0]
        self.group = group

    def merge(self, other: "_Accumulator") -> None:
        self.total += other.total
        self.second += other.second
        self.norm2 += other.norm2
        self.norm4 += other.norm4
        self.count += other.count
        self.excluded += other.excluded
        self.group = other.group

    def finish(self, times: np.ndarray, meta: dict) -> DensitySeries:
        n = self.count
        if n < 2:
            raise ConfigurationError("need at least two valid samples")
        seen = n * self.group + self.excluded
        if self.excluded:
            log.warning("excluded %d of %d trajectories with non-finite states", self.excluded, seen)
        if self.excluded > MAX_EXCLUDED_FRACTION * seen:
            raise IntegratorError(f"{self.excluded} of {seen} trajectories diverged; reduce dt or coupling")
        mean = self.total / n
        var = np.maximum(self.second / n - np.abs(mean) ** 2, 0.0) * n / (n - 1)
        tr_mean = self.norm2 / n
        tr_var = np.maximum(self.norm4 / n - tr_mean**2, 0.0) * n / (n - 1)
        mean = 0.5 * (mean + np.conj(np.transpose(mean, (0, 2, 1))))
        return DensitySeries(times, mean, np.sqrt(var / n), np.sqrt(tr_var / n), n * self.group, self.excluded, meta)


def run_ensemble(
    n_traj: int,
    seed: int,
    n_t: int,
    dt: float,
    batch_runner,
    batch_size: int = 256,
    workers: int = 1,
    meta: dict | None = None,
    group: int = 1,
) -> DensitySeries:
    """Shared driver: split trajectory indices into fixed batches and merge in index order.

    ``batch_runner(indices) -> states (n, n_t, 4)`` does the physics.
    Batches are fixed by ``batch_size`` alone, so results do not depend on
    ``workers``.  ``group=2`` treats antithetic pairs as single samples
    when estimating error bars.
    """
    if n_traj < 2 * group:
        raise ConfigurationError(f"an ensemble needs n_traj >= {2 * group}")
    if n_traj % group or batch_size % group:
        raise ConfigurationError("n_traj and batch_size must be multiples of the pairing size")
    batches = [np.arange(s, min(s + batch_size, n_traj)) for s in range(0, n_traj, batch_size)]

    def one(idx):
        acc = _Accumulator(n_t)
        acc.add(batch_runner(idx), group)
        return acc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(one, batches))
    else:
        parts = [one(b) for b in batches]
    acc = _Accumulator(n_t)
    for p in parts:
        acc.merge(p)
    times = dt * np.arange(n_t)
    info = {"n_traj": n_traj, "seed": seed, "batch_size": batch_size}
    info.update(meta or {})
    return acc.finish(times, info)


def ensemble_average(
    initial,
    ofield: OField,
    h_a: np.ndarray,
    G: np.ndarray,
    grid: ModeGrid,
    n_traj: int,
    seed: int,
    batch_size: int = 256,
    workers: int = 1,
    antithetic: bool = True,
) -> DensitySeries:
    """Average ``|psi(t, z*)><psi(t, z)|`` over ``n_traj`` vacuum-noise trajectories.

    With ``antithetic`` (default) trajectories come in ``(z, -z)`` pairs,
    which removes the odd-order noise fluctuations from the coherences.
    Error bars are then computed from pair means.
    """
    psi0 = _as_vector(initial)
    drift = vacuum_drift(ofield, h_a)
    times = ofield.times

    def runner(idx):
        noise = sample_vacuum_noise(G, grid, times, seed, idx, antithetic)
        return integrate_linear(np.broadcast_to(psi0, (idx.size, 4)), drift, [(noise.z_star, _LOWER)], ofield.dt)

    info = {"kind": "vacuum-sse", "antithetic": antithetic}
    return run_ensemble(n_traj, seed, ofield.n_t, ofield.dt, runner, batch_size, workers, info, 2 if antithetic else 1)


# ---- master equations -------------------------------------------------------


def _dissipator(rho: np.ndarray, terms) -> np.ndarray:
    out = np.zeros_like(rho)
    for ops, obars in terms:
        for X, Ob in zip(ops, obars):
            c = X @ rho @ Ob.conj().T - rho @ Ob.conj().T @ X
            out += c + c.conj().T
    return out


def integrate_master(initial_rho: np.ndarray, h_a: np.ndarray, terms: list[tuple[np.ndarray, np.ndarray]], dt: float, n_t: int, drift_limit: float = TRACE_DRIFT_LIMIT) -> np.ndarray:
    """RK4 for ``d rho/dt = -i[H_A, rho] + sum ([X_mu, rho Obar_mu^dag] + h.c.)``.

    ``terms`` pairs a stack of jump-like operators ``X`` (2, 4, 4) with
    the matching ``Obar`` series (n_t, 2, 4, 4).
    """
    rho = np.asarray(initial_rho, dtype=complex).copy()
    tr0 = np.trace(rho).real
    h = np.asarray(h_a, dtype=complex)
    mids = [(X, _midpoints(ob)) for X, ob in terms]
    out = np.empty((n_t, 4, 4), dtype=complex)
    out[0] = rho

    def rhs(r, k, half):
        sel = [(X, (m if half else ob)[k]) for (X, ob), (_, m) in zip(terms, mids)]
        return -1j * (h @ r - r @ h) + _dissipator(r, sel)

    for i in range(n_t - 1):
        k1 = rhs(rho, i, False)
        k2 = rhs(rho + 0.5 * dt * k1, i, True)
        k3 = rhs(rho + 0.5 * dt * k2, i, True)
        k4 = rhs(rho + dt * k3, i + 1, False)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().T)
        drift = abs(np.trace(rho).real - tr0)
        if not np.isfinite(drift) or drift > drift_limit:
            raise IntegratorError(f"trace drifted by {drift:.3g} at t={(i + 1) * dt:.4g}; reduce dt")
        out[i + 1] = rho
    return out


def _as_density(initial) -> np.ndarray:
    if isinstance(initial, str) or np.asarray(initial).ndim == 1:
        return projector(_as_vector(initial))
    rho = np.asarray(initial, dtype=complex)
    if rho.shape != (4, 4):
        raise InvalidStateError("initial density matrix must be 4x4")
    return rho


def master_equation_solve(initial, ofield: OField, h_a: np.ndarray, dt: float, t_max: float) -> DensitySeries:
    if abs(dt - ofield.dt) > 1e-12:
        raise ConfigurationError("master equation step must match the O-field step")
    n_t = int(round(t_max / dt)) + 1
    if n_t > ofield.n_t:
        raise ConfigurationError(f"O-field covers t <= {ofield.t_max}, need {t_max}")
    rho = integrate_master(_as_density(initial), h_a, [(_LOWER, ofield.obar[:n_t])], dt, n_t)
    return DensitySeries(dt * np.arange(n_t), rho, meta={"kind": "master"})


def liouvillian(h: np.ndarray, jumps: list[np.ndarray]) -> np.ndarray:
    """Row-major vectorized Lindblad generator: ``vec(d rho) = L vec(rho)``."""
    eye = np.eye(h.shape[0])
    L = -1j * (np.kron(h, eye) - np.kron(eye, h.T))
    for c in jumps:
        cdc = c.conj().T @ c
        L += np.kron(c, c.conj()) - 0.5 * np.kron(cdc, eye) - 0.5 * np.kron(eye, cdc.T)
    return L


def evolve_liouvillian(L: np.ndarray, rho0: np.ndarray, dt: float, n_t: int) -> np.ndarray:
    step = expm(L * dt)
    out = np.empty((n_t, 4, 4), dtype=complex)
    v = rho0.reshape(-1).astype(complex)
    for i in range(n_t):
        out[i] = v.reshape(4, 4)
        v = step @ v
    return out


def lindblad_solve(gamma: float, initial, dt: float, t_max: float, omega_a: float = 1.0, omega_b: float = 1.0) -> DensitySeries:
    """Collective decay ``gamma D[sigma_a^- + sigma_b^-]`` solved by matrix exponentials."""
    from .hilbert import atom_hamiltonian

    n_t = int(round(t_max / dt)) + 1
    jump = np.sqrt(gamma) * (SIGMA_MINUS["a"] + SIGMA_MINUS["b"])
    L = liouvillian(atom_hamiltonian(omega_a, omega_b), [jump])
    rho = evolve_liouvillian(L, _as_density(initial), dt, n_t)
    return DensitySeries(dt * np.arange(n_t), rho, meta={"kind": "lindblad", "gamma": gamma})
