"""Spatial coupling profiles, waveguide mode grids and Fourier couplings.

Lengths are in units of ``lambda = c / omega`` with ``c = omega = 1``, so a
wavevector ``k`` is also a frequency and a distance is also a travel time.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigurationError, HorizonError


@dataclass(frozen=True)
class Comb:
    """``g(x) = (g0 / norm) * sum_i delta(x - x_i)``; ``norm`` defaults to ``m``."""

    points: tuple[float, ...]
    strength: float = 1.0
    norm: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(float(x) for x in self.points))
        if len(self.points) < 1:
            raise ConfigurationError("comb needs at least one coupling point")
        if self.norm is not None and self.norm <= 0:
            raise ConfigurationError("comb normalization must be positive")

    @property
    def m(self) -> int:
        return len(self.points)

    @property
    def normalization(self) -> float:
        return float(self.m) if self.norm is None else float(self.norm)

    def transform(self, k: np.ndarray) -> np.ndarray:
        phases = np.exp(-1j * np.outer(k, self.points))
        return self.strength / self.normalization * phases.sum(axis=1)

    def profile(self, x: np.ndarray) -> np.ndarray:
        raise ConfigurationError("a comb has no pointwise profile; use .points")

    @property
    def centers(self) -> tuple[float, ...]:
        return self.points


@dataclass(frozen=True)
class Gaussian:
    center: float
    width: float
    strength: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"Gaussian width must be positive, got {self.width}")

    def transform(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return self.strength * np.exp(-1j * k * self.center - 0.5 * (k * self.width) ** 2)

    def profile(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = self.width
        return self.strength * np.exp(-((x - self.center) ** 2) / (2 * s * s)) / (s * np.sqrt(2 * np.pi))

    @property
    def centers(self) -> tuple[float, ...]:
        return (self.center,)


@dataclass(frozen=True)
class DoubleGaussian:
    """Two equal-width Gaussian lobes, each of unit area times ``strength``."""

    center1: float
    center2: float
    width: float
    strength: float = 1.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"Gaussian width must be positive, got {self.width}")

    def transform(self, k: np.ndarray) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        env = np.exp(-0.5 * (k * self.width) ** 2)
        return self.strength * env * (np.exp(-1j * k * self.center1) + np.exp(-1j * k * self.center2))

    def profile(self, x: np.ndarray) -> np.ndarray:
        return (
            Gaussian(self.center1, self.width, self.strength).profile(x)
            + Gaussian(self.center2, self.width, self.strength).profile(x)
        )

    @property
    def centers(self) -> tuple[float, ...]:
        return (self.center1, self.center2)


CouplingDistribution = Union[Comb, Gaussian, DoubleGaussian]


def translate(dist: CouplingDistribution, shift: float) -> CouplingDistribution:
    if isinstance(dist, Comb):
        return Comb(tuple(x + shift for x in dist.points), dist.strength, dist.norm)
    if isinstance(dist, Gaussian):
        return Gaussian(dist.center + shift, dist.width, dist.strength)
    return DoubleGaussian(dist.center1 + shift, dist.center2 + shift, dist.width, dist.strength)


def with_strength(dist: CouplingDistribution, strength: float) -> CouplingDistribution:
    if isinstance(dist, Comb):
        return Comb(dist.points, strength, dist.norm)
    if isinstance(dist, Gaussian):
        return Gaussian(dist.center, dist.width, strength)
    return DoubleGaussian(dist.center1, dist.center2, dist.width, strength)


def center_separation(a: CouplingDistribution, b: CouplingDistribution, tol: float = 1e-9) -> float:
    """``x_b1 - x_a1``; for double peaks also checks ``x_b2 - x_a2`` matches."""
    ca, cb = a.centers, b.centers
    if len(ca) != len(cb):
        raise ConfigurationError("distributions have different numbers of centers")
    diffs = [y - x for x, y in zip(ca, cb)]
    if any(abs(d - diffs[0]) > tol for d in diffs):
        raise ConfigurationError(f"center offsets are not uniform: {diffs}")
    return float(diffs[0])


def double_peak_pair(separation: float, spacing: float, width: float, strength: float = 1.0, origin: float = 0.0):
    """Two double-peak profiles with peak spacing ``spacing`` offset by ``separation``."""
    a = DoubleGaussian(origin, origin + spacing, width, strength)
    return a, translate(a, separation)


@dataclass(frozen=True)
class ModeGrid:
    """Uniform symmetric wavevector grid.

    ``dispersion="linear"`` gives ``omega_k = c |k|`` (the physical
    waveguide).  ``dispersion="band"`` gives ``omega_k = omega_c + c k``, a
    flat band around ``omega_c`` used for broadband/Markov reference runs.
    """

    k: np.ndarray
    omega: np.ndarray
    dk: float
    c: float = 1.0
    dispersion: str = "linear"
    omega_c: float = 0.0
    t_max: float | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.k.size

    @property
    def k_max(self) -> float:
        return float(np.max(np.abs(self.k)))

    @property
    def t_recurrence(self) -> float:
        return 2 * np.pi / (self.c * self.dk)

    @property
    def weight(self) -> float:
        """Factor folded into every coupling so mode sums approximate ``dk / 2pi`` integrals."""
        return float(np.sqrt(self.dk / (2 * np.pi)))

    @property
    def omega_max(self) -> float:
        return float(np.max(np.abs(self.omega)))


def build_mode_grid(
    k_max: float,
    n: int,
    t_max: float,
    c: float = 1.0,
    dispersion: str = "linear",
    omega_c: float = 0.0,
) -> ModeGrid:
    if not k_max > 0:
        raise ConfigurationError(f"k_max must be positive, got {k_max}")
    if n < 2 or n % 2:
        raise ConfigurationError(f"mode count must be an even integer >= 2, got {n}")
    if dispersion not in ("linear", "band"):
        raise ConfigurationError(f"unknown dispersion {dispersion!r}")
    k = np.linspace(-k_max, k_max, n)
    dk = 2 * k_max / (n - 1)
    t_rec = 2 * np.pi / (c * dk)
    if t_max >= 0.5 * t_rec:
        raise HorizonError(
            f"t_max={t_max} reaches half the recurrence time {t_rec:.4g}; "
            f"maximum allowed t_max is below {0.5 * t_rec:.4g} (use more modes or a smaller k_max)"
        )
    omega = c * np.abs(k) if dispersion == "linear" else omega_c + c * k
    k.setflags(write=False)
    omega.setflags(write=False)
    return ModeGrid(k=k, omega=omega, dk=dk, c=c, dispersion=dispersion, omega_c=omega_c, t_max=t_max)


def fourier_coupling(dist: CouplingDistribution, grid: ModeGrid) -> np.ndarray:
    """Per-mode couplings ``G_k = weight * int g(x) exp(-i k x) dx``."""
    return grid.weight * np.asarray(dist.transform(grid.k), dtype=complex)


def markov_rate(dist: CouplingDistribution, grid: ModeGrid, omega0: float = 1.0) -> float:
    """Golden-rule decay rate ``2 pi J(omega0)`` of one atom on this grid's dispersion."""
    if grid.dispersion == "linear":
        k_res = np.array([omega0, -omega0]) / grid.c
    else:
        k_res = np.array([(omega0 - grid.omega_c) / grid.c])
    return float(np.sum(np.abs(dist.transform(k_res)) ** 2) / grid.c)


def strength_for_rate(dist: CouplingDistribution, grid: ModeGrid, gamma: float, omega0: float = 1.0) -> float:
    """Strength ``g0`` giving Markov decay rate ``gamma`` for the shape of ``dist``."""
    unit = markov_rate(with_strength(dist, 1.0), grid, omega0)
    if unit <= 0:
        raise ConfigurationError("distribution has no weight at resonance; cannot calibrate strength")
    return float(np.sqrt(gamma / unit))
