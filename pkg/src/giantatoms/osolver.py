"""Noise-free effective operators ``O_mu(t, s)`` and their kernel convolutions.

Each ``O_mu(t, s)`` evolves in ``t`` by a commutator with the generator
``L(t) = -i H_A - sum_nu sigma_nu^+ Obar_nu(t)``, starting from ``sigma_mu^-``
on the diagonal ``s = t``.  Because ``L`` does not depend on ``s``, a whole
row ``{O(t, s_j)}`` advances by one similarity transform ``M O M^-1`` with
``M = expm(dt * L_mid)``.  ``L_mid`` comes from a predictor-corrector pass
that resolves the implicit coupling between ``Obar(t)`` and ``O(t, s)``.

Two representations are provided: 4x4 matrices (the production path) and
the eight scalar coefficients on the four-operator lowering basis.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .correlation import CorrelationKernel
from .errors import ConfigurationError, IntegratorError
from .hilbert import ATOMS, SIGMA_MINUS, SIGMA_PLUS, atom_hamiltonian, lowering_basis, project_lowering

GROWTH_LIMIT = 1e6


@dataclass
class Channel:
    """One convolution term ``- sum_mu coupler_mu @ Obar_mu`` of the generator.

    ``values[mu, nu, lag]`` is the tabulated kernel, ``delta`` its singular
    part and ``init[mu]`` the diagonal value of the field.  With
    ``reflected=True`` the kernel is probed at ``t + u`` instead of ``t - s``.
    """

    values: np.ndarray
    delta: np.ndarray
    init: np.ndarray
    coupler: np.ndarray
    reflected: bool = False


@dataclass(frozen=True)
class OField:
    """Result of a matrix-form march.

    ``obar[i, mu]`` is ``Obar_mu(t_i)``.  ``column[i, mu]`` is ``O_mu(t_i, 0)``.
    ``rows`` is filled only when the full two-time field was requested;
    ``rows[i]`` then has shape ``(i + 1, 2, 4, 4)`` and holds ``O(t_i, s_j)``.
    """

    dt: float
    obar: np.ndarray
    column: np.ndarray
    rows: list | None = None
    window: int | None = None

    @property
    def n_t(self) -> int:
        return self.obar.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t)

    @property
    def t_max(self) -> float:
        return self.dt * (self.n_t - 1)

    def matrix(self, mu: str, i: int, j: int) -> np.ndarray:
        if self.rows is None:
            raise ConfigurationError("two-time field was not stored; rerun with store=True")
        if j > i:
            raise ConfigurationError("O(t, s) is only defined for s <= t")
        return self.rows[i][j, ATOMS.index(mu)]

    def to_csv(self, path: str | Path) -> None:
        header = ["omega_t"]
        for mu in ATOMS:
            for r in range(4):
                for c in range(4):
                    header += [f"re_obar_{mu}_{r}{c}", f"im_obar_{mu}_{r}{c}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for m in range(2):
                    for v in self.obar[i, m].ravel():
                        row += [repr(float(v.real)), repr(float(v.imag))]
                writer.writerow(row)


def _trapezoid_weights(j0: int, i_new: int, dt: float) -> np.ndarray:
    """Weights for points ``j0 .. i_new - 1`` of a trapezoid rule ending at ``i_new``."""
    w = np.full(i_new - j0, dt)
    if j0 == 0 and w.size:
        w[0] = 0.5 * dt
    return w


def _window_rows(kernel: CorrelationKernel, rel_tol: float) -> int | None:
    if kernel.is_zero():
        return 1
    support = kernel.support(rel_tol)
    if support >= kernel.t_max:
        return None
    return int(np.ceil(support / kernel.dt)) + 2


def _check_growth(arr: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > GROWTH_LIMIT:
        raise IntegratorError(f"O-field grew beyond {GROWTH_LIMIT:g} at t={t:.4g}; reduce dt")


def march(channels: list[Channel], h_a: np.ndarray, dt: float, n_t: int, window: int | None = None, store: bool = False):
    """Advance every channel's two-time field over ``n_t`` grid times.

    Returns ``(obar, column, rows)`` where ``obar[c]`` has shape
    ``(n_t, 2, 4, 4)``, ``column[c]`` holds the ``s = 0`` entries and ``rows``
    (if stored) is a list over time of per-channel row stacks.
    """
    n_ch = len(channels)
    base = -1j * np.asarray(h_a, dtype=complex)
    for ch in channels:
        need = 2 * (n_t - 1) + 1 if ch.reflected else n_t
        if ch.values.shape[-1] < need:
            raise ConfigurationError("kernel table does not cover the requested horizon")
        if ch.reflected and window is not None:
            raise ConfigurationError("a rolling window cannot be used with reflected kernels")
    R = [np.zeros((n_t, 2, 4, 4), dtype=complex) for _ in range(n_ch)]
    obar = [np.zeros((n_t, 2, 4, 4), dtype=complex) for _ in range(n_ch)]
    column = [np.zeros((n_t, 2, 4, 4), dtype=complex) for _ in range(n_ch)]
    rows = [] if store else None

    def end_term(ch: Channel, lag: int, weight: float) -> np.ndarray:
        # diagonal contribution: O_nu(t, t) = init_nu
        k = ch.values[:, :, lag] * weight + 0.5 * ch.delta
        return np.einsum("mn,nab->mab", k, ch.init)

    def generator(obars) -> np.ndarray:
        L = base.copy()
        for ch, ob in zip(channels, obars):
            L -= np.einsum("mab,mbc->ac", ch.coupler, ob)
        return L

    for c, ch in enumerate(channels):
        R[c][0] = ch.init
        column[c][0] = ch.init
        obar[c][0] = end_term(ch, 0, 0.0)
    if store:
        rows.append([R[c][:1].copy() for c in range(n_ch)])

    for i in range(n_t - 1):
        i_new = i + 1
        j0 = 0 if window is None else max(0, i_new - window)
        w = _trapezoid_weights(j0, i_new, dt)
        js = np.arange(j0, i_new)
        S, ends = [], []
        for c, ch in enumerate(channels):
            lags = i_new + js if ch.reflected else i_new - js
            kw = ch.values[:, :, lags] * w
            S.append(np.einsum("mnj,jnab->mab", kw, R[c][j0:i_new], optimize=True))
            ends.append(end_term(ch, 2 * i_new if ch.reflected else 0, 0.5 * dt))

        L_i = generator([obar[c][i] for c in range(n_ch)])
        Mp = expm(dt * L_i)
        Mp_inv = np.linalg.inv(Mp)
        pred = [Mp @ S[c] @ Mp_inv + ends[c] for c in range(n_ch)]
        L_mid = 0.5 * (L_i + generator(pred))
        M = expm(dt * L_mid)
        M_inv = np.linalg.inv(M)

        lo = 0 if (store or window is None) else j0
        for c, ch in enumerate(channels):
            if lo > 0:
                R[c][0] = M @ R[c][0] @ M_inv
            R[c][lo:i_new] = M @ R[c][lo:i_new] @ M_inv
            R[c][i_new] = ch.init
            obar[c][i_new] = M @ S[c] @ M_inv + ends[c]
            column[c][i_new] = R[c][0]
            _check_growth(obar[c][i_new], i_new * dt)
        if store:
            rows.append([R[c][: i_new + 1].copy() for c in range(n_ch)])
    return obar, column, rows


def vacuum_channel(kernel: CorrelationKernel) -> Channel:
    return Channel(
        values=kernel.values,
        delta=kernel.delta,
        init=np.stack([SIGMA_MINUS[m] for m in ATOMS]),
        coupler=np.stack([SIGMA_PLUS[m] for m in ATOMS]),
    )


def _steps(dt: float, t_max: float) -> int:
    n = t_max / dt
    if abs(n - round(n)) > 1e-6:
        raise ConfigurationError(f"t_max={t_max} is not a multiple of dt={dt}")
    return int(round(n)) + 1


def _check_kernel_grid(kernel: CorrelationKernel, dt: float, t_max: float) -> int:
    if abs(kernel.dt - dt) > 1e-12 * max(1.0, dt):
        raise ConfigurationError(f"kernel step {kernel.dt} differs from solver step {dt}")
    n_t = _steps(dt, t_max)
    if kernel.n_tau < n_t:
        raise ConfigurationError(f"kernel covers t <= {kernel.t_max}, need {t_max}")
    return n_t


def evolve_matrix_field(
    kernel: CorrelationKernel,
    h_a: np.ndarray,
    dt: float,
    t_max: float,
    store: bool = False,
    window: int | str | None = "auto",
    support_tol: float = 1e-6,
) -> OField:
    """March the matrix-form O-field and its convolutions to ``t_max``.

    ``window="auto"`` truncates the convolution to the kernel's support
    (entries below ``support_tol`` of the peak are dropped); ``None`` keeps
    the full history.  Storing the full field costs ``O(n_t^2)`` memory.
    """
    n_t = _check_kernel_grid(kernel, dt, t_max)
    win = _window_rows(kernel, support_tol) if window == "auto" else window
    obar, column, rows = march([vacuum_channel(kernel)], h_a, dt, n_t, win, store)
    flat_rows = [r[0] for r in rows] if rows is not None else None
    return OField(dt, obar[0], column[0], flat_rows, win)


def obar_at(field: OField, t: float) -> tuple[np.ndarray, np.ndarray]:
    """``(Obar_a(t), Obar_b(t))``; off-grid times use linear interpolation between neighbours."""
    x = t / field.dt
    if x < -1e-9 or x > field.n_t - 1 + 1e-9:
        raise ConfigurationError(f"t={t} outside the solved range [0, {field.t_max}]")
    i0 = min(int(np.floor(x + 1e-9)), field.n_t - 2) if field.n_t > 1 else 0
    w = x - i0
    if field.n_t == 1 or abs(w) < 1e-9:
        ob = field.obar[i0]
    else:
        ob = field.obar[i0] * (1 - w) + field.obar[i0 + 1] * w
    return ob[0].copy(), ob[1].copy()


def span_residual(field: OField) -> float:
    """Largest relative component of stored ``O_mu(t, s)`` outside the lowering basis."""
    worst = 0.0
    stacks = field.rows if field.rows is not None else [field.column[i : i + 1] for i in range(field.n_t)]
    for stack in stacks:
        for m, mu in enumerate(ATOMS):
            ops = stack[:, m]
            _, resid = project_lowering(ops, mu)
            scale = max(float(np.max(np.abs(ops))), 1e-300)
            worst = max(worst, resid / scale)
    return worst


# ---- coefficient representation ---------------------------------------------


def coefficient_generator(omega: tuple[float, float], P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Matrices ``A[mu]`` with ``d p_mu / dt = A[mu] p_mu``.

    ``P[mu, j]`` and ``Q[mu, j]`` are the auto and cross convolutions of the
    basis coefficients (``j = 0..3`` for basis operators 1..4).
    """
    A = np.zeros((2, 4, 4), dtype=complex)
    for m in range(2):
        n = 1 - m
        Pm, Qm, Pn, Qn = P[m], Q[m], P[n], Q[n]
        wm, wn = omega[m], omega[n]
        shared = Pm[3] + Qn[1] + Qm[1] + Pn[3]
        a = A[m]
        a[0, 0] = 1j * wm + Pm[0] + Qn[2] + Qm[1] + Pn[3]
        a[0, 1] = -Qm[0] + Qm[3] + Pn[1] - Pn[2]
        a[0, 3] = shared
        a[1, 1] = 1j * wn + Pm[3] + Qn[1] + Qm[2] + Pn[0]
        a[1, 0] = Pm[1] - Pm[2] - Qn[0] + Qn[3]
        a[1, 2] = shared
        a[2, 2] = 1j * wn + Pn[0] + Qm[2] + Qn[1] + Pm[3]
        a[2, 3] = -Qn[0] + Qn[3] + Pm[1] - Pm[2]
        a[2, 1] = shared
        a[3, 3] = 1j * wm + Pm[0] + Qn[2] + Qm[1] + Pn[3]
        a[3, 0] = shared
        a[3, 2] = -Qm[0] + Qm[3] + Pn[1] - Pn[2]
    return A


def obar_from_coefficients(P: np.ndarray, Q: np.ndarray) -> np.ndarray:
    """Rebuild ``Obar_mu`` (shape (2, 4, 4)) from auto/cross convolutions."""
    out = np.zeros((2, 4, 4), dtype=complex)
    for m, mu in enumerate(ATOMS):
        n = 1 - m
        b = lowering_basis(mu)
        out[m] = (
            (P[m, 0] + Q[n, 2]) * b[0]
            + (P[m, 1] + Q[n, 3]) * b[1]
            + (P[m, 2] + Q[n, 0]) * b[2]
            + (P[m, 3] + Q[n, 1]) * b[3]
        )
    return out


@dataclass(frozen=True)
class CoefficientField:
    """Coefficient-form march result.

    ``P[i, mu, j]``, ``Q[i, mu, j]`` are the convolutions at ``t_i``;
    ``column[i, mu, j]`` is ``p_mu j(t_i, 0)``; ``p`` (if stored) is a list of
    per-time arrays of shape ``(i + 1, 2, 4)``.
    """

    dt: float
    P: np.ndarray
    Q: np.ndarray
    column: np.ndarray
    p: list | None = None

    @property
    def n_t(self) -> int:
        return self.P.shape[0]

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.n_t)

    @property
    def obar(self) -> np.ndarray:
        return np.stack([obar_from_coefficients(self.P[i], self.Q[i]) for i in range(self.n_t)])

    def operator(self, mu: str, i: int, j: int) -> np.ndarray:
        if self.p is None:
            raise ConfigurationError("coefficient field was not stored; rerun with store=True")
        coeffs = self.p[i][j, ATOMS.index(mu)]
        return sum(c * b for c, b in zip(coeffs, lowering_basis(mu)))

    def to_csv(self, path: str | Path) -> None:
        header = ["omega_t"]
        for mu in ATOMS:
            for j in range(1, 5):
                header += [f"re_p_{mu}{j}_s0", f"im_p_{mu}{j}_s0"]
        for name in ("P", "Q"):
            for mu in ATOMS:
                for j in range(1, 5):
                    header += [f"re_{name}_{mu}{j}", f"im_{name}_{mu}{j}"]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for i, t in enumerate(self.times):
                row = [repr(float(t))]
                for arr in (self.column[i], self.P[i], self.Q[i]):
                    for v in arr.ravel():
                        row += [repr(float(v.real)), repr(float(v.imag))]
                writer.writerow(row)


def evolve_coefficient_field(
    kernel: CorrelationKernel,
    omega_a: float,
    omega_b: float,
    dt: float,
    t_max: float,
    store: bool = False,
    window: int | str | None = "auto",
    support_tol: float = 1e-6,
) -> CoefficientField:
    """Same march as :func:`evolve_matrix_field` on the eight scalar coefficients."""
    n_t = _check_kernel_grid(kernel, dt, t_max)
    win = _window_rows(kernel, support_tol) if window == "auto" else window
    omega = (omega_a, omega_b)
    auto = np.stack([kernel.values[0, 0], kernel.values[1, 1]])  # alpha_mu mu
    cross = np.stack([kernel.values[1, 0], kernel.values[0, 1]])  # alpha_nu mu
    d_auto = np.array([kernel.delta[0, 0], kernel.delta[1, 1]])
    d_cross = np.array([kernel.delta[1, 0], kernel.delta[0, 1]])
    e1 = np.zeros((2, 4), dtype=complex)
    e1[:, 0] = 1.0

    p = np.zeros((n_t, 2, 4), dtype=complex)
    p[0] = e1
    P = np.zeros((n_t, 2, 4), dtype=complex)
    Q = np.zeros((n_t, 2, 4), dtype=complex)
    column = np.zeros((n_t, 2, 4), dtype=complex)
    column[0] = e1
    P[0] = 0.5 * d_auto[:, None] * e1
    Q[0] = 0.5 * d_cross[:, None] * e1
    stored = [p[:1].copy()] if store else None

    for i in range(n_t - 1):
        i_new = i + 1
        j0 = 0 if win is None else max(0, i_new - win)
        w = _trapezoid_weights(j0, i_new, dt)
        lags = i_new - np.arange(j0, i_new)
        rows = p[j0:i_new]  # (J, 2, 4)
        SP = np.einsum("mj,jmk->mk", auto[:, lags] * w, rows)
        SQ = np.einsum("mj,jmk->mk", cross[:, lags] * w, rows)
        endP = (0.5 * dt * auto[:, 0] + 0.5 * d_auto)[:, None] * e1
        endQ = (0.5 * dt * cross[:, 0] + 0.5 * d_cross)[:, None] * e1

        A_i = coefficient_generator(omega, P[i], Q[i])
        Ep = np.stack([expm(dt * A_i[m]) for m in range(2)])
        Pp = np.einsum("mkl,ml->mk", Ep, SP) + endP
        Qp = np.einsum("mkl,ml->mk", Ep, SQ) + endQ
        A_mid = 0.5 * (A_i + coefficient_generator(omega, Pp, Qp))
        E = np.stack([expm(dt * A_mid[m]) for m in range(2)])

        lo = 0 if (store or win is None) else j0
        if lo > 0:
            p[0] = np.einsum("mkl,ml->mk", E, p[0])
        p[lo:i_new] = np.einsum("mkl,jml->jmk", E, p[lo:i_new])
        p[i_new] = e1
        P[i_new] = np.einsum("mkl,ml->mk", E, SP) + endP
        Q[i_new] = np.einsum("mkl,ml->mk", E, SQ) + endQ
        column[i_new] = p[0]
        _check_growth(P[i_new], i_new * dt)
        if store:
            stored.append(p[: i_new + 1].copy())
    return CoefficientField(dt, P, Q, column, stored)


def free_field(omega_a: float, omega_b: float, dt: float, t_max: float, store: bool = False) -> OField:
    """Field for a zero kernel: ``O_mu(t, s) = exp(i w_mu (t - s)) sigma_mu^-``."""
    return evolve_matrix_field(CorrelationKernel.zero(dt, t_max), atom_hamiltonian(omega_a, omega_b), dt, t_max, store, window=None)


__all__ = [
    "Channel",
    "CoefficientField",
    "OField",
    "coefficient_generator",
    "evolve_coefficient_field",
    "evolve_matrix_field",
    "free_field",
    "march",
    "obar_at",
    "obar_from_coefficients",
    "span_residual",
    "vacuum_channel",
]
