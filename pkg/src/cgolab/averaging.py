"""Averaging of X^{-lambda} norms over scale and rotation.

For ``h <= tau <= 2h`` and an angle ``theta`` the rotated frequencies
``zeta^k(tau, theta)`` give a two-parameter family of weighted norms.
Averaging over the family beats the worst single member for rough data,
which is how good frequencies are selected for the CGO construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .fitting import SlopeFit, fit_slope
from .frames import Zeta, ZetaFrame, rotate_frame, tau_max, zeta_rot
from .multipliers import DivergenceFormCoefficient
from .spectral import GridFunction, GridSpec

__all__ = [
    "AveragingSample",
    "cov_map",
    "jacobian",
    "jacobian_fd",
    "jacobian_lower_bound",
    "quadrature_nodes",
    "average_norm",
    "fixed_theta_norms",
    "select_theta",
    "average_slope_test",
    "AverageSlopeReport",
    "measure_integral",
    "measure_regime",
]


@dataclass(frozen=True)
class AveragingSample:
    """The selected grid sample ``(tau*, theta*)`` and its score.

    Attributes
    ----------
    h : float
    tau, theta : float
    zeta1, zeta2 : Zeta
    score : float
        ``S(tau*, theta*)``, the minimum over the grid.
    average_score : float
        Mean of ``S`` over the grid; ``score <= average_score`` always.
    """

    h: float
    tau: float
    theta: float
    zeta1: Zeta
    zeta2: Zeta
    score: float
    average_score: float


def _check_tau(frame: ZetaFrame, tau: float) -> None:
    if not 0 < tau <= min(1.0, tau_max(frame)) * (1 + 1e-15):
        raise ValueError(f"tau={tau} outside (0, min(1, 1/(2|xi0|))]")


def cov_map(frame: ZetaFrame, xi: Sequence[float], tau: float, theta: float, k: int = 1) -> tuple[float, float]:
    """``(Re P(tau xi) / tau^2, Im P(tau xi) / tau^2)`` for ``zeta^k(tau, theta)``."""
    _check_tau(frame, tau)
    xi = np.asarray(xi, dtype=float)
    z = zeta_rot(frame, k, tau, theta).vec
    P = tau * tau * float(xi @ xi) - 2j * tau * complex(z @ xi)
    return P.real / tau**2, P.imag / tau**2


def jacobian(frame: ZetaFrame, xi: Sequence[float], tau: float, theta: float) -> float:
    """Closed-form ``|det d(z1, z2)/d(tau, theta)|``; identical for ``k = 1, 2``."""
    _check_tau(frame, tau)
    xi = np.asarray(xi, dtype=float)
    m1, m2 = rotate_frame(frame, theta)
    a, b = float(m1 @ xi), float(m2 @ xi)
    x02 = float(frame.xi0 @ frame.xi0)
    root = math.sqrt(1.0 - tau * tau * x02 / 4.0)
    return (4.0 / tau**3) * (tau * tau * x02 * b * b / (4.0 * root) + root * (a * a + b * b))


def jacobian_lower_bound(frame: ZetaFrame, xi: Sequence[float], tau: float) -> float:
    """``2 |xi_perp|^2 / tau^3`` with ``xi_perp`` the projection on the ``mu``-plane."""
    xi = np.asarray(xi, dtype=float)
    perp2 = float(frame.mu1 @ xi) ** 2 + float(frame.mu2 @ xi) ** 2
    return 2.0 * perp2 / tau**3


def jacobian_fd(frame: ZetaFrame, xi: Sequence[float], tau: float, theta: float, k: int = 1,
                step: float = 1e-5) -> float:
    """Central-difference Jacobian determinant, relative step in ``tau``."""
    dt = step * tau
    dth = step
    zt_p = cov_map(frame, xi, tau + dt, theta, k)
    zt_m = cov_map(frame, xi, tau - dt, theta, k)
    zh_p = cov_map(frame, xi, tau, theta + dth, k)
    zh_m = cov_map(frame, xi, tau, theta - dth, k)
    a11 = (zt_p[0] - zt_m[0]) / (2 * dt)
    a21 = (zt_p[1] - zt_m[1]) / (2 * dt)
    a12 = (zh_p[0] - zh_m[0]) / (2 * dth)
    a22 = (zh_p[1] - zh_m[1]) / (2 * dth)
    return abs(a11 * a22 - a12 * a21)


def quadrature_nodes(h: float, n_tau: int, n_theta: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Midpoint nodes on ``[h, 2h] x [0, 2 pi)`` and the weight of ``(1/h) dtau dtheta``."""
    if n_tau < 1 or n_theta < 1:
        raise ValueError("quadrature sizes must be positive")
    taus = h * (1.0 + (np.arange(n_tau) + 0.5) / n_tau)
    thetas = 2 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    return taus, thetas, 2 * math.pi / (n_tau * n_theta)


def _power_spectrum(fields: Sequence[GridFunction]) -> np.ndarray:
    """Root of the summed power spectra, usable as a real coefficient array."""
    acc = None
    for f in fields:
        c = f.spectral()
        p = c.real**2 + c.imag**2
        acc = p if acc is None else acc + p
    return np.sqrt(acc).astype(complex)


def _norm2(spec: GridSpec, amp: np.ndarray, zeta: Zeta, tau: float, order: float) -> float:
    return kernels.xlambda_sq(spec, amp, zeta.vec, tau, order)


def average_norm(f: GridFunction, lam: float, h: float, frame: ZetaFrame, k: int = 1,
                 n_tau: int = 16, n_theta: int = 16) -> float:
    """``(1/h) int_0^{2pi} int_h^{2h} ||f||^2_{X^{-lam}} dtau dtheta``, norms at scale ``tau``."""
    if n_tau < 8 or n_theta < 8:
        raise ValueError("quadrature sizes must be at least 8")
    amp = _power_spectrum([f])
    if not np.any(amp):
        return 0.0
    taus, thetas, w = quadrature_nodes(h, n_tau, n_theta)
    total = 0.0
    for th in thetas:
        for t in taus:
            total += _norm2(f.spec, amp, zeta_rot(frame, k, t, th), t, -lam)
    return w * total


def fixed_theta_norms(f: GridFunction, lam: float, h: float, frame: ZetaFrame, thetas: Sequence[float],
                      k: int = 1, n_tau: int = 16) -> np.ndarray:
    """For each ``theta``, the ``tau``-average ``(1/h) int_h^{2h} ||f||^2_{X^{-lam}} dtau``."""
    amp = _power_spectrum([f])
    taus, _, _ = quadrature_nodes(h, n_tau, 8)
    out = np.zeros(len(thetas))
    for i, th in enumerate(thetas):
        out[i] = np.mean([_norm2(f.spec, amp, zeta_rot(frame, k, t, th), t, -lam) for t in taus])
    return out


def _score_grid(Q1: DivergenceFormCoefficient, q1: DivergenceFormCoefficient, Q2: DivergenceFormCoefficient,
                q2: DivergenceFormCoefficient, h: float, frame: ZetaFrame, n_tau: int, n_theta: int,
                m: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    spec = Q1.spec
    taus, thetas, _ = quadrature_nodes(h, n_tau, n_theta)
    scal = [c.field(0) for c in (q1, q2) if not c.is_zero]
    vec = [c.field(j) for c in (Q1, Q2) if not c.is_zero for j in range(spec.d)]
    # the norms are additive over l and over vector components, so sum spectra first
    qa = _power_spectrum(scal) if scal else None
    Qa = _power_spectrum(vec) if vec else None
    S = np.zeros((n_tau, n_theta))
    for i, t in enumerate(taus):
        for j, th in enumerate(thetas):
            val = 0.0
            for k in (1, 2):
                z = zeta_rot(frame, k, t, th)
                if qa is not None:
                    val += _norm2(spec, qa, z, t, -m / 2)
                if Qa is not None:
                    val += _norm2(spec, Qa, z, t, -m / 2) / t**2
                    val += _norm2(spec, Qa, z, t, (1 - m) / 2) / t**3
            S[i, j] = val
    return taus, thetas, S


def select_theta(Q1: DivergenceFormCoefficient, q1: DivergenceFormCoefficient, Q2: DivergenceFormCoefficient,
                 q2: DivergenceFormCoefficient, h: float, frame: ZetaFrame, n_tau: int = 16,
                 n_theta: int = 16, m: int = 2) -> AveragingSample:
    """Grid minimizer of the selection score over ``[h, 2h] x [0, 2 pi)``.

    The score at ``(tau, theta)`` sums, over both frequencies ``zeta^k`` and
    both coefficient pairs, ``||q||^2`` and ``tau^-2 ||Q||^2`` at order
    ``-m/2`` plus ``tau^-3 ||Q||^2`` at order ``(1-m)/2``.
    """
    if 2 * h > tau_max(frame) * (1 + 1e-15):
        raise ValueError(f"h={h} too large for xi0: need 2h <= 1/(2|xi0|)")
    taus, thetas, S = _score_grid(Q1, q1, Q2, q2, h, frame, n_tau, n_theta, m)
    i, j = np.unravel_index(int(np.argmin(S)), S.shape)
    t, th = float(taus[i]), float(thetas[j])
    return AveragingSample(h, t, th, zeta_rot(frame, 1, t, th), zeta_rot(frame, 2, t, th),
                           float(S[i, j]), float(S.mean()))


AVERAGING_CSV_HEADER = ["h", "tau_star", "theta_star", "score", "average_score"]


@dataclass
class AverageSlopeReport:
    """Fits of the averaged norm and of every fixed-angle norm against ``h``.

    Attributes
    ----------
    hs : list of float
    averaged : list of float
    fit : SlopeFit or None
    bound : float
        ``-2(s + lam - 1 + eps)``.
    fixed_fits : list of SlopeFit
        One fit per fixed angle.
    degenerate : bool
    """

    hs: list
    averaged: list
    fit: SlopeFit | None
    bound: float
    fixed_fits: list
    degenerate: bool = False

    @property
    def worst_fixed_slope(self) -> float | None:
        return min(f.slope for f in self.fixed_fits) if self.fixed_fits else None

    @property
    def passed(self) -> bool:
        if self.degenerate:
            return True
        return self.fit is not None and self.fit.slope >= self.bound - 0.2

    @property
    def beats_worst_fixed(self) -> bool:
        if self.degenerate:
            return True
        w = self.worst_fixed_slope
        return self.fit is not None and w is not None and self.fit.slope > w


def average_slope_test(f: GridFunction, lam: float, s: float, eps: float, frame: ZetaFrame,
                       hs: Sequence[float], n_tau: int = 16, n_theta: int = 16, k: int = 1) -> AverageSlopeReport:
    """Fit the ``h``-exponent of :func:`average_norm` and of each fixed-angle norm.

    Raises
    ------
    ValueError
        If ``2 - 2 eps <= s <= 2 lam`` fails.
    """
    if not (2 - 2 * eps <= s <= 2 * lam):
        raise ValueError(f"exponent window 2-2eps <= s <= 2lam violated (s={s}, lam={lam}, eps={eps})")
    bound = -2 * (s + lam - 1 + eps)
    hs = sorted(hs, reverse=True)
    if not np.any(f.spectral()):
        return AverageSlopeReport(list(hs), [0.0] * len(hs), None, bound, [], degenerate=True)
    _, thetas, _ = quadrature_nodes(1.0, n_tau, n_theta)
    avg, fixed = [], []
    for h in hs:
        per_theta = fixed_theta_norms(f, lam, h, frame, thetas, k, n_tau)
        fixed.append(per_theta)
        avg.append(float(2 * math.pi * per_theta.mean()))
    fixed = np.array(fixed)
    fit = fit_slope(hs, avg)
    fixed_fits = [fit_slope(hs, fixed[:, j]) for j in range(len(thetas))]
    return AverageSlopeReport(list(hs), avg, fit, bound, fixed_fits)


# ---------------------------------------------------------------- measure estimate


def measure_integral(frame: ZetaFrame, xi: Sequence[float], h: float, eps: float, n_tau: int = 64,
                     n_theta: int = 64, k: int = 1) -> float:
    """``(1/h) int_0^{2pi} int_h^{2h} (tau + |P(tau xi)|)^{2 eps - 2} dtau dtheta`` by midpoints."""
    xi = np.asarray(xi, dtype=float)
    taus, thetas, w = quadrature_nodes(h, n_tau, n_theta)
    x02 = float(frame.xi0 @ frame.xi0)
    c, s = np.cos(thetas), np.sin(thetas)
    a1, a2 = float(frame.mu1 @ xi), float(frame.mu2 @ xi)
    m1x = a1 * c - a2 * s
    m2x = a1 * s + a2 * c
    x0x = float(frame.xi0 @ xi)
    xx = float(xi @ xi)
    sign = 1.0 if k == 1 else -1.0
    T = taus[:, None]
    root = np.sqrt(1.0 - T * T * x02 / 4.0)
    zx = sign * m1x[None, :] + 1j * sign * root * m2x[None, :] - 0.5j * T * x0x
    P = T * T * xx - 2j * T * zx
    return float(w * np.sum((T + np.abs(P)) ** (2 * eps - 2)))


def measure_regime(frame: ZetaFrame, xi: Sequence[float], h: float) -> str:
    """Which of the three cases of the measure estimate ``xi`` falls in."""
    xi = np.asarray(xi, dtype=float)
    n = float(np.linalg.norm(xi))
    perp = math.hypot(float(frame.mu1 @ xi), float(frame.mu2 @ xi))
    if n <= max(16 * float(np.linalg.norm(frame.xi0)), 1.0):
        return "small"
    return "large-thin" if n * n <= 16 * perp / h else "large-flat"
