"""Bath correlation kernels tabulated on a uniform lag grid.

A kernel stores ``alpha[mu, nu](tau) = sum_k conj(G_mu k) G_nu k exp(-i w_k tau)``
for ``mu, nu in (a, b)`` at ``tau = i * dt``.  An optional singular part
``delta[mu, nu] * delta(tau)`` represents the memoryless limit; the
one-sided convolutions used by the O-solver count it with weight 1/2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .coupling import CouplingDistribution, ModeGrid, fourier_coupling
from .errors import ConfigurationError

PAIRS = (("a", "a"), ("a", "b"), ("b", "a"), ("b", "b"))
IDX = {"a": 0, "b": 1}
_CHUNK = 512


def _mode_sum(weights: np.ndarray, omega: np.ndarray, taus: np.ndarray, sign: float = -1.0) -> np.ndarray:
    """``sum_k weights[..., k] exp(sign * i * omega_k * tau)`` for every tau."""
    taus = np.asarray(taus, dtype=float)
    out = np.empty(weights.shape[:-1] + taus.shape, dtype=complex)
    for start in range(0, taus.size, _CHUNK):
        sl = slice(start, start + _CHUNK)
        phase = np.exp(sign * 1j * np.outer(omega, taus[sl]))  # (K, chunk)
        out[..., sl] = weights @ phase
    return out


def pair_weights(ga: np.ndarray, gb: np.ndarray, conj_left: bool = True, conj_right: bool = False) -> np.ndarray:
    """Stack ``G_mu^(*) G_nu^(*)`` for all four ordered pairs into shape (2, 2, K)."""
    g = np.stack([ga, gb])
    left = g.conj() if conj_left else g
    right = g.conj() if conj_right else g
    return left[:, None, :] * right[None, :, :]


@dataclass(frozen=True)
class CorrelationKernel:
    dt: float
    values: np.ndarray  # (2, 2, n_tau)
    delta: np.ndarray = field(default_factory=lambda: np.zeros((2, 2), dtype=complex))
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.ndim != 3 or vals.shape[:2] != (2, 2):
            raise ConfigurationError(f"kernel values must have shape (2, 2, n), got {vals.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "delta", np.asarray(self.delta, dtype=complex).reshape(2, 2))

    @property
    def n_tau(self) -> int:
        return self.values.shape[-1]

    @property
    def tau(self) -> np.ndarray:
        return self.dt * np.arange(self.n_tau)

    @property
    def t_max(self) -> float:
        return self.dt * (self.n_tau - 1)

    def pair(self, mu: str, nu: str) -> np.ndarray:
        return self.values[IDX[mu], IDX[nu]]

    def at(self, tau) -> np.ndarray:
        """Linear interpolation of the regular part; returns shape (2, 2) + tau.shape."""
        tau = np.asarray(tau, dtype=float)
        x = tau / self.dt
        if np.any(x < -1e-9) or np.any(x > self.n_tau - 1 + 1e-9):
            raise ConfigurationError("lag outside the tabulated range")
        i0 = np.clip(np.floor(x).astype(int), 0, self.n_tau - 2)
        w = x - i0
        return self.values[..., i0] * (1 - w) + self.values[..., i0 + 1] * w

    def is_zero(self) -> bool:
        return not np.any(self.values) and not np.any(self.delta)

    def support(self, rel_tol: float = 1e-6) -> float:
        """Largest lag where any entry exceeds ``rel_tol`` times the peak magnitude."""
        mag = np.max(np.abs(self.values), axis=(0, 1))
        peak = mag.max() if mag.size else 0.0
        if peak == 0:
            return 0.0
        idx = np.nonzero(mag > rel_tol * peak)[0]
        return float(idx[-1] * self.dt)

    def scaled(self, factor: complex) -> "CorrelationKernel":
        return CorrelationKernel(self.dt, self.values * factor, self.delta * factor, dict(self.metadata))

    @classmethod
    def zero(cls, dt: float, t_max: float) -> "CorrelationKernel":
        n = int(round(t_max / dt)) + 1
        return cls(dt, np.zeros((2, 2, n), dtype=complex), metadata={"kind": "zero"})

    @classmethod
    def delta_limit(cls, gamma, dt: float, t_max: float) -> "CorrelationKernel":
        """Memoryless kernel ``gamma[mu, nu] * delta(tau)``.

        A scalar ``gamma`` fills all four pairs (co-located atoms, the
        collective-decay case).
        """
        g = np.full((2, 2), gamma, dtype=complex) if np.isscalar(gamma) else np.asarray(gamma, dtype=complex)
        n = int(round(t_max / dt)) + 1
        return cls(dt, np.zeros((2, 2, n), dtype=complex), g, metadata={"kind": "delta", "gamma": np.asarray(g).tolist()})

    def to_csv(self, path: str | Path, extra: dict | None = None) -> None:
        header = ["omega_t"]
        for mu, nu in PAIRS:
            header += [f"re_alpha_{mu}{nu}", f"im_alpha_{mu}{nu}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.tau):
                row = [repr(float(t))]
                for mu, nu in PAIRS:
                    v = self.values[IDX[mu], IDX[nu], i]
                    row += [repr(float(v.real)), repr(float(v.imag))]
                writer.writerow(row)


def tau_count(dt: float, t_max: float) -> int:
    n = t_max / dt
    if abs(n - round(n)) > 1e-6:
        raise ConfigurationError(f"t_max={t_max} is not a multiple of dt={dt}")
    return int(round(n)) + 1


def _check_resolution(grid: ModeGrid, dt: float) -> None:
    limit = 0.1 / grid.omega_max
    if dt > limit * (1 + 1e-9):
        raise ConfigurationError(
            f"dt={dt} does not resolve the fastest mode phase; need dt <= 0.1/omega_max = {limit:.4g}"
        )


def kernel_from_couplings(ga, gb, grid: ModeGrid, taus) -> np.ndarray:
    """Direct mode sum at arbitrary (also negative) lags; shape (2, 2, len(taus))."""
    return _mode_sum(pair_weights(np.asarray(ga), np.asarray(gb)), grid.omega, np.atleast_1d(taus))


def build_kernel(dists, grid: ModeGrid, dt: float, t_max: float) -> CorrelationKernel:
    """Tabulate the vacuum auto/cross kernels of two coupling distributions."""
    _check_resolution(grid, dt)
    n = tau_count(dt, t_max)
    ga, gb = (fourier_coupling(d, grid) for d in dists)
    vals = kernel_from_couplings(ga, gb, grid, dt * np.arange(n))
    return CorrelationKernel(dt, vals, metadata={"kind": "vacuum", "dists": [repr(d) for d in dists]})


def vacuum_expectation_kernel(ga, gb, grid: ModeGrid, taus) -> np.ndarray:
    """Same kernel evaluated as ``<0| C_mu(t) C_nu^dag(s) |0>`` with ``s = 0``.

    ``C_mu^dag(t) = sum_k G_mu k c_k^dag e^{i w_k t}`` is the collective
    emission operator of atom ``mu``.  Acting on the vacuum it gives a
    one-photon wavepacket; the kernel is the overlap of two such packets.
    """
    taus = np.atleast_1d(np.asarray(taus, dtype=float))
    g = np.stack([ga, gb])
    emitted_now = g  # C_nu^dag(0)|0>, one amplitude per mode
    out = np.zeros((2, 2, taus.size), dtype=complex)
    for j, tau in enumerate(taus):
        emitted_then = g * np.exp(1j * grid.omega * tau)  # C_mu^dag(tau)|0>
        out[:, :, j] = emitted_then.conj() @ emitted_now.T
    return out


def bose_occupation(omega: np.ndarray, beta: float, omega_floor: float) -> np.ndarray:
    """``1/(exp(beta w) - 1)`` with frequencies below ``omega_floor`` clamped to it."""
    if not beta > 0:
        raise ConfigurationError(f"inverse temperature must be positive, got {beta}")
    w = np.maximum(np.asarray(omega, dtype=float), omega_floor)
    if np.any(w <= 0):
        raise ConfigurationError("thermal occupation needs positive frequencies")
    return 1.0 / np.expm1(np.minimum(beta * w, 700.0))


@dataclass(frozen=True)
class ThermalKernelPair:
    """Kernels for the Bogoliubov-mapped thermal bath.

    ``alpha`` pairs with the ``z`` noise (emission, weights ``n+1``);
    ``alpha_prime`` pairs with the ``w`` noise (absorption, weights ``n``).
    The absorption kernel carries ``exp(+i w tau)`` and ``G_mu G_nu^*``,
    which is what the ``w`` noise covariance produces.
    """

    alpha: CorrelationKernel
    alpha_prime: CorrelationKernel
    beta: float
    occupation: np.ndarray
    omega_floor: float


def default_omega_floor(grid: ModeGrid) -> float:
    return 0.5 * grid.dk * grid.c


def build_thermal_pair(dists, grid: ModeGrid, beta: float, dt: float, t_max: float, omega_floor: float | None = None) -> ThermalKernelPair:
    _check_resolution(grid, dt)
    floor = default_omega_floor(grid) if omega_floor is None else omega_floor
    nbar = bose_occupation(grid.omega, beta, floor)
    ga, gb = (fourier_coupling(d, grid) for d in dists)
    taus = dt * np.arange(tau_count(dt, t_max))
    emit = pair_weights(ga, gb) * (nbar + 1.0)
    absorb = pair_weights(ga, gb, conj_left=False, conj_right=True) * nbar
    alpha = CorrelationKernel(dt, _mode_sum(emit, grid.omega, taus, -1.0), metadata={"kind": "thermal", "beta": beta})
    alpha_p = CorrelationKernel(dt, _mode_sum(absorb, grid.omega, taus, +1.0), metadata={"kind": "thermal-absorption", "beta": beta})
    return ThermalKernelPair(alpha, alpha_p, beta, nbar, floor)


def squeeze_profile(grid: ModeGrid, r: float, band_center: float | None = None, band_width: float | None = None) -> np.ndarray:
    """Constant squeezing ``r`` or a Gaussian band around ``|k| = band_center``."""
    if band_center is None:
        return np.full(grid.n, float(r))
    if band_width is None or band_width <= 0:
        raise ConfigurationError("band squeezing needs a positive band_width")
    return r * np.exp(-((np.abs(grid.k) - band_center) ** 2) / (2 * band_width**2))


@dataclass(frozen=True)
class SqueezedKernelPair:
    """``alpha`` as in vacuum; ``beta[mu, nu](tau) = sum_k G*_mu G*_nu tanh(r_k) e^{-i w tau}``.

    ``beta`` is tabulated to twice the horizon because the squeezed
    generator probes it at ``t + u`` with ``u`` in ``[0, t]``.
    """

    alpha: CorrelationKernel
    beta: CorrelationKernel
    r: np.ndarray


def build_squeezed_pair(dists, grid: ModeGrid, r_profile, dt: float, t_max: float) -> SqueezedKernelPair:
    _check_resolution(grid, dt)
    r = np.broadcast_to(np.asarray(r_profile, dtype=float), (grid.n,)).copy()
    if not np.all(np.isfinite(r)):
        raise ConfigurationError("squeeze profile must be finite")
    ga, gb = (fourier_coupling(d, grid) for d in dists)
    alpha = build_kernel(dists, grid, dt, t_max)
    taus = dt * np.arange(2 * (tau_count(dt, t_max) - 1) + 1)
    w = pair_weights(ga, gb, conj_left=True, conj_right=True) * np.tanh(r)
    beta = CorrelationKernel(dt, _mode_sum(w, grid.omega, taus, -1.0), metadata={"kind": "squeezed"})
    return SqueezedKernelPair(alpha, beta, r)


def local_maxima(y: np.ndarray, rel_height: float = 0.05) -> np.ndarray:
    """Indices of interior local maxima higher than ``rel_height`` of the global max."""
    y = np.asarray(y, dtype=float)
    if y.size < 3:
        return np.array([], dtype=int)
    inner = (y[1:-1] > y[:-2]) & (y[1:-1] >= y[2:])
    idx = np.nonzero(inner)[0] + 1
    return idx[y[idx] >= rel_height * y.max()]
