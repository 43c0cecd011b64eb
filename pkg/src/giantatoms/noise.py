"""Colored complex Gaussian noises built by direct mode superposition.

Every trajectory owns a counter-based Philox stream keyed by
``(seed, trajectory index, stream id)``, so a realization depends only on
those three numbers and not on batching or execution order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coupling import ModeGrid
from .errors import ConfigurationError

Z_STREAM = 0
W_STREAM = 1


def trajectory_rng(seed: int, index: int, stream: int = Z_STREAM) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(index), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def draw_modes(seed: int, indices, n_modes: int, stream: int = Z_STREAM, r=None, antithetic: bool = False) -> np.ndarray:
    """Standard complex Gaussians ``E|z|^2 = 1``, one row per trajectory index.

    With a squeeze profile ``r`` the draw follows the measure
    ``exp(-|z|^2) |<z|squeezed vacuum>|^2``: the real and imaginary parts
    have variances ``1/(2(1 + tanh r))`` and ``1/(2(1 - tanh r))``.

    ``antithetic=True`` pairs indices ``2p`` and ``2p + 1``: both use stream
    ``p`` and the odd member takes the negated draw.  Each row is still an
    exact sample of the measure, and the pair cancels odd-order noise terms.
    """
    indices = np.atleast_1d(indices)
    if antithetic:
        base = draw_modes(seed, indices // 2, n_modes, stream, r)
        return np.where((indices % 2 == 1)[:, None], -base, base)
    if r is None:
        sx = sy = np.full(n_modes, np.sqrt(0.5))
    else:
        t = np.tanh(np.asarray(r, dtype=float))
        sx = np.sqrt(0.5 / (1.0 + t))
        sy = np.sqrt(0.5 / (1.0 - t))
    out = np.empty((indices.size, n_modes), dtype=complex)
    for row, idx in enumerate(indices):
        gen = trajectory_rng(seed, idx, stream)
        xy = gen.standard_normal((2, n_modes))
        out[row] = sx * xy[0] + 1j * sy * xy[1]
    return out


def _superpose(amps: np.ndarray, coeff: np.ndarray, omega: np.ndarray, times: np.ndarray, sign: float) -> np.ndarray:
    """``sum_k amps[n, k] coeff[mu, k] exp(sign i w_k t)`` -> shape (n, 2, len(times))."""
    phase = np.exp(sign * 1j * np.outer(omega, times))  # (K, T)
    basis = coeff[:, :, None] * phase[None, :, :]  # (2, K, T)
    return np.einsum("nk,mkt->nmt", amps, basis, optimize=True)


@dataclass(frozen=True)
class NoiseRealization:
    """Noise samples for a batch of trajectories.

    ``z_star[n, mu, i]`` is ``z*_mu`` at ``times[i]`` for trajectory
    ``indices[n]``.  ``w_star`` has the same layout and holds the second
    noise exactly as it enters the trajectory generator at ``times[i]``.
    """

    times: np.ndarray
    z_star: np.ndarray
    seed: int
    indices: np.ndarray
    w_star: np.ndarray | None = None
    kind: str = "vacuum"

    def __post_init__(self):
        if self.z_star.shape[-1] != self.times.size:
            raise ConfigurationError("noise length does not match its time grid")
        if self.w_star is not None and self.w_star.shape != self.z_star.shape:
            raise ConfigurationError("z and w noises must share a layout")

    @property
    def n_traj(self) -> int:
        return self.z_star.shape[0]


def _couplings(G) -> np.ndarray:
    g = np.asarray(G, dtype=complex)
    if g.ndim != 2 or g.shape[0] != 2:
        raise ConfigurationError("couplings must be given as a (2, n_modes) array")
    return g


def sample_vacuum_noise(G, grid: ModeGrid, times, seed: int, indices=0, antithetic: bool = False) -> NoiseRealization:
    """``z*_mu(t) = -i sum_k G_mu k z_k^* exp(i w_k t)`` with one draw shared by both atoms."""
    g = _couplings(G)
    times = np.asarray(times, dtype=float)
    idx = np.atleast_1d(indices)
    z = draw_modes(seed, idx, grid.n, antithetic=antithetic)
    zs = _superpose(z.conj(), -1j * g, grid.omega, times, +1.0)
    return NoiseRealization(times, zs, int(seed), idx)


def sample_thermal_noise(F, H, grid: ModeGrid, times, seed: int, indices=0, antithetic: bool = False) -> NoiseRealization:
    """Independent emission and absorption noises of the mapped thermal bath.

    ``F = sqrt(n+1) G`` drives ``z*``; ``H = sqrt(n) G`` drives
    ``w*_mu(t) = -i sum_k H*_mu k w_k^* exp(-i w_k t)``.
    """
    f, h = _couplings(F), _couplings(H)
    times = np.asarray(times, dtype=float)
    idx = np.atleast_1d(indices)
    z = draw_modes(seed, idx, grid.n, Z_STREAM, antithetic=antithetic)
    w = draw_modes(seed, idx, grid.n, W_STREAM, antithetic=antithetic)
    zs = _superpose(z.conj(), -1j * f, grid.omega, times, +1.0)
    ws = _superpose(w.conj(), -1j * h.conj(), grid.omega, times, -1.0)
    return NoiseRealization(times, zs, int(seed), idx, ws, kind="thermal")


def sample_squeezed_noise(
    G, r_profile, grid: ModeGrid, times, seed: int, indices=0, measure: str = "vacuum", antithetic: bool = False
) -> NoiseRealization:
    """Both squeezed-bath noises from one draw ``{z_k}``.

    ``z*_mu(t) = -i sum_k G_mu k z_k^* e^{i w t}`` and
    ``w*_mu(t) = i sum_k G*_mu k tanh(r_k) z_k^* e^{i w t}``.  The stored
    ``w_star[..., i]`` is ``w*_mu(-times[i])``, the value that drives the
    normalized trajectory at time ``times[i]``.

    ``measure="squeezed"`` draws ``z_k`` from the weight under which the
    normalized trajectories average to the reduced state; ``"vacuum"`` uses
    the plain Gaussian measure for kernel-level statistics.
    """
    if measure not in ("vacuum", "squeezed"):
        raise ConfigurationError(f"unknown measure {measure!r}")
    g = _couplings(G)
    r = np.broadcast_to(np.asarray(r_profile, dtype=float), (grid.n,))
    times = np.asarray(times, dtype=float)
    idx = np.atleast_1d(indices)
    z = draw_modes(seed, idx, grid.n, Z_STREAM, r=r if measure == "squeezed" else None, antithetic=antithetic)
    zs = _superpose(z.conj(), -1j * g, grid.omega, times, +1.0)
    ws = _superpose(z.conj(), 1j * g.conj() * np.tanh(r), grid.omega, -times, +1.0)
    return NoiseRealization(times, zs, int(seed), idx, ws, kind=f"squeezed-{measure}")


def interpolate(values: np.ndarray, times: np.ndarray, t) -> np.ndarray:
    """Linear interpolation along the last axis on a uniform grid."""
    dt = times[1] - times[0]
    x = (np.asarray(t, dtype=float) - times[0]) / dt
    i0 = np.clip(np.floor(x + 1e-12).astype(int), 0, times.size - 2)
    w = x - i0
    return values[..., i0] * (1 - w) + values[..., i0 + 1] * w


def sample_statistic(samples: np.ndarray) -> tuple[complex, float, float]:
    """Mean of complex samples with standard errors of its real and imaginary parts."""
    samples = np.asarray(samples)
    n = samples.size
    mean = samples.mean()
    se_re = samples.real.std(ddof=1) / np.sqrt(n)
    se_im = samples.imag.std(ddof=1) / np.sqrt(n)
    return complex(mean), float(se_re), float(se_im)


def within_sigma(estimate: complex, target: complex, se_re: float, se_im: float, nsigma: float = 4.0, floor: float = 1e-12) -> bool:
    return (
        abs(estimate.real - target.real) <= nsigma * max(se_re, floor)
        and abs(estimate.imag - target.imag) <= nsigma * max(se_im, floor)
    )


def covariance_report(noise: NoiseRealization, kernel_lookup, probes, nsigma: float = 4.0, second=None) -> list[dict]:
    """Compare empirical second moments with tabulated kernels at probe pairs.

    ``probes`` holds ``(mu, nu, i, j)`` time-index tuples.  For each probe
    the rows report ``M[z_mu(t_i) z*_nu(t_j)]`` against
    ``kernel_lookup(mu, nu, t_i - t_j)``, plus ``M[z_mu z_nu]`` and
    ``M[z_mu]`` against zero.  ``second`` selects the conjugated partner
    (default: the ``z`` noise itself).
    """
    from .correlation import IDX

    zs = noise.z_star
    partner = zs if second is None else second
    rows = []
    for mu, nu, i, j in probes:
        m, n = IDX[mu], IDX[nu]
        z_t = zs[:, m, i].conj()  # z_mu(t)
        zc_s = partner[:, n, j]  # partner*_nu(s)
        t, s = noise.times[i], noise.times[j]
        target = complex(kernel_lookup(mu, nu, t - s))
        est, se_re, se_im = sample_statistic(z_t * zc_s)
        est_zz, zz_re, zz_im = sample_statistic(z_t * zs[:, n, j].conj())
        est_z, z_re, z_im = sample_statistic(z_t)
        rows.append(
            {
                "mu": mu,
                "nu": nu,
                "t": float(t),
                "s": float(s),
                "target_re": target.real,
                "target_im": target.imag,
                "cov_re": est.real,
                "cov_im": est.imag,
                "se_re": se_re,
                "se_im": se_im,
                "cov_ok": within_sigma(est, target, se_re, se_im, nsigma),
                "zz_re": est_zz.real,
                "zz_im": est_zz.imag,
                "zz_ok": within_sigma(est_zz, 0j, zz_re, zz_im, nsigma),
                "mean_re": est_z.real,
                "mean_im": est_z.imag,
                "mean_ok": within_sigma(est_z, 0j, z_re, z_im, nsigma),
            }
        )
    return rows
