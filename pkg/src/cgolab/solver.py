"""Fixed-point construction of CGO remainders and their decay in ``h``.

A CGO solution ``exp(x.zeta/h)(a + psi)`` of ``(-Lap)^m u + Q.Du + q u = 0``
requires ``L_zeta psi = -L_zeta a`` in the domain, where

    L_zeta = P(hD)^m + h^{2m} [Q.(zeta/(ih) + D) + q].

The remainder is the limit of ``psi <- I^m f - h^{2m} I^m T psi`` with
``I = I_phi`` and ``T`` the first-order part.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .fitting import SlopeFit, fit_slope
from .frames import XLambdaWeight, Zeta, ZetaFrame, rotate_frame, tau_max, xlambda_norm, zeta_rot
from .multipliers import (
    Cutoff,
    DivergenceFormCoefficient,
    InverseReport,
    apply_Iphi,
    apply_P,
    build_cutoff,
    coefficient_action,
    radial_step,
)
from .spectral import GridFunction, GridSpec

__all__ = [
    "CGOSolution",
    "NonContraction",
    "MaxIterExceeded",
    "amplitude_one",
    "amplitude_linear",
    "rhs_from_amplitude",
    "solve_psi",
    "contraction_ratio",
    "find_h0",
    "decay_study",
    "DecayReport",
]


class NonContraction(RuntimeError):
    """The fixed-point map failed to contract; ``h`` must decrease."""

    def __init__(self, h: float, ratio: float):
        super().__init__(f"no contraction at h={h:g} (ratio {ratio:.3g})")
        self.h = h
        self.ratio = ratio


class MaxIterExceeded(RuntimeError):
    """The iteration did not reach tolerance within the iteration budget."""


@dataclass
class CGOSolution:
    """One conjugated solve.

    Attributes
    ----------
    h : float
    zeta : Zeta
    transpose : bool
        Whether the transposed operator was solved.
    amplitude : GridFunction or None
    psi : GridFunction
    iterations : int
    ratio : float
        Contraction ratio measured from successive updates.
    residual : float
        X^{-m/2} norm of ``L_zeta psi - f`` restricted to the domain ball.
    rhs_norm : float
        X^{-m/2} norm of ``f``.
    clamped, deflated : int
        Regularized-division bookkeeping summed over all applications.
    """

    h: float
    zeta: Zeta
    transpose: bool
    amplitude: GridFunction | None
    psi: GridFunction
    iterations: int
    ratio: float
    residual: float
    rhs_norm: float
    clamped: int
    deflated: int
    history: list = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return self.residual <= 1e-6 * self.rhs_norm or self.rhs_norm == 0.0


# ---------------------------------------------------------------- amplitudes

AMPLITUDE_RADII = (1.0, 3.1)


def amplitude_ramp_beta(N: int) -> float:
    """Kaiser steepness of the amplitude cutoff, the sharpest the grid resolves."""
    return 18.0 if N < 64 else 28.0


def amplitude_one(spec: GridSpec) -> GridFunction:
    """The constant amplitude ``a = 1``."""
    return GridFunction(spec, np.ones(spec.shape, dtype=complex), "physical")


def amplitude_linear(spec: GridSpec, frame: ZetaFrame, theta: float = 0.0,
                     radii: tuple[float, float] = AMPLITUDE_RADII) -> GridFunction:
    """``phi_a (mu1 - i mu2).x / 2`` with ``phi_a = 1`` on ``|x| <= radii[0]``.

    Inside that ball ``(mu1 + i mu2).D a = -i`` and ``P(hD)^2 a = 0``.
    """
    m1, m2 = rotate_frame(frame, theta)
    lin = np.zeros(spec.shape, dtype=complex)
    for j, ax in enumerate(spec.coord_axes()):
        lin = lin + 0.5 * (m1[j] - 1j * m2[j]) * ax
    cut = radial_step(spec.radius(), radii[0], radii[1], beta=amplitude_ramp_beta(spec.N))
    return GridFunction(spec, cut * lin, "physical")


# ---------------------------------------------------------------- right-hand side


def rhs_from_amplitude(a: GridFunction, Q: DivergenceFormCoefficient, q: DivergenceFormCoefficient,
                       h: float, zeta, transpose: bool = False, m: int = 2,
                       principal: bool = True) -> GridFunction:
    """``f = -L_zeta a`` (or the transposed operator).

    ``principal=False`` drops ``P(hD)^m a``; this is legitimate when ``a``
    solves ``P(hD)^m a = 0`` wherever the equation is imposed, and keeps
    the amplitude cutoff from leaking into the remainder.
    """
    out = coefficient_action(Q, q, a, h, zeta, transpose).spectral() * (h ** (2 * m))
    if principal:
        out = out + apply_P(a, h, zeta, m).spectral()
    return GridFunction(a.spec, -out, "spectral")


# ---------------------------------------------------------------- solver


def _iter_I(u: GridFunction, h: float, zeta, cut: Cutoff, m: int, rep: InverseReport) -> GridFunction:
    for _ in range(m):
        u = apply_Iphi(u, h, zeta, cut, report=rep)
    return u


def _apply_L(u: GridFunction, Q, q, h, zeta, transpose: bool, m: int) -> GridFunction:
    lo = coefficient_action(Q, q, u, h, zeta, transpose).spectral() * (h ** (2 * m))
    return GridFunction(u.spec, apply_P(u, h, zeta, m).spectral() + lo, "spectral")


def interior_residual(psi: GridFunction, f: GridFunction, Q, q, h, zeta, transpose: bool, m: int) -> float:
    """X^{-m/2} norm of ``L_zeta psi - f`` restricted to ``|x| <= R``."""
    spec = psi.spec
    r = _apply_L(psi, Q, q, h, zeta, transpose, m).physical() - f.physical()
    r = np.where(spec.interior_mask(), r, 0.0)
    return xlambda_norm(GridFunction(spec, r, "physical"), XLambdaWeight(h, Zeta(np.asarray(_zv(zeta))), -m / 2))


def _zv(zeta) -> np.ndarray:
    return zeta.vec if isinstance(zeta, Zeta) else np.asarray(zeta, dtype=complex)


def solve_psi(f: GridFunction, Q: DivergenceFormCoefficient, q: DivergenceFormCoefficient, h: float, zeta,
              transpose: bool = False, tol: float = 1e-10, max_iter: int = 200, m: int = 2,
              cut: Cutoff | None = None, psi0: GridFunction | None = None,
              amplitude: GridFunction | None = None) -> CGOSolution:
    """Iterate ``psi <- I^m f - h^{2m} I^m T psi`` from ``psi0`` (default 0).

    Stops when the X^{m/2} update is at most ``tol`` times the iterate.

    Raises
    ------
    NonContraction
        If the update ratio is at least 1 on three consecutive iterations.
    MaxIterExceeded
        If ``max_iter`` iterations do not reach tolerance.
    """
    spec = f.spec
    cut = build_cutoff(spec) if cut is None else cut
    z = Zeta(_zv(zeta))
    w_pos = XLambdaWeight(h, z, m / 2)
    w_neg = XLambdaWeight(h, z, -m / 2)
    rep = InverseReport()
    base = _iter_I(f, h, z, cut, m, rep)
    h2m = h ** (2 * m)
    linear = Q.is_zero and q.is_zero
    psi = psi0 if psi0 is not None else GridFunction(spec, np.zeros(spec.shape, dtype=complex), "spectral")
    history: list = []
    prev_diff = None
    ratio = 0.0
    growth = 0
    it = 0
    if linear:
        psi, it = base, 1
    else:
        for it in range(1, max_iter + 1):
            T = coefficient_action(Q, q, psi, h, z, transpose)
            new = base - _iter_I(T, h, z, cut, m, rep) * h2m
            diff = xlambda_norm(new - psi, w_pos)
            size = xlambda_norm(new, w_pos)
            history.append(diff)
            if prev_diff:
                ratio = diff / prev_diff
                growth = growth + 1 if ratio >= 1 else 0
                if growth >= 3:
                    raise NonContraction(h, ratio)
            prev_diff = diff
            psi = new
            if diff <= tol * size:
                break
        else:
            raise MaxIterExceeded(f"no convergence in {max_iter} iterations at h={h:g}")
    res = interior_residual(psi, f, Q, q, h, z, transpose, m)
    return CGOSolution(h, z, transpose, amplitude, psi.as_spectral(), it, ratio, res,
                       xlambda_norm(f, w_neg), rep.clamped, rep.deflated, history)


def contraction_ratio(Q: DivergenceFormCoefficient, q: DivergenceFormCoefficient, h: float, zeta,
                      transpose: bool = False, m: int = 2, cut: Cutoff | None = None,
                      iters: int = 8, seed: int = 0) -> float:
    """Power-iteration estimate of the X^{m/2} norm of ``psi -> h^{2m} I^m T psi``."""
    spec = Q.spec
    cut = build_cutoff(spec) if cut is None else cut
    if Q.is_zero and q.is_zero:
        return 0.0
    from .spectral import random_bandlimited

    z = Zeta(_zv(zeta))
    w = XLambdaWeight(h, z, m / 2)
    rng = np.random.default_rng(seed)
    u = random_bandlimited(spec, rng)
    u = u * (1.0 / xlambda_norm(u, w))
    rep = InverseReport()
    est = 0.0
    for _ in range(iters):
        v = _iter_I(coefficient_action(Q, q, u, h, z, transpose), h, z, cut, m, rep) * (h ** (2 * m))
        est = xlambda_norm(v, w)
        if est == 0:
            return 0.0
        u = v * (1.0 / est)
    return est


def find_h0(Q, q, frame: ZetaFrame, hs: Sequence[float], theta: float = 0.0, m: int = 2,
            cut: Cutoff | None = None, transpose: bool = False) -> float | None:
    """First ``h`` (in decreasing order) whose contraction ratio is at most 1/2."""
    for h in sorted(hs, reverse=True):
        z = zeta_rot(frame, 1, min(h, tau_max(frame)), theta)
        if contraction_ratio(Q, q, h, z, transpose, m, cut) <= 0.5:
            return h
    return None


# ---------------------------------------------------------------- decay study


@dataclass
class DecayReport:
    """Rows ``(h, theta, psi_norm, ratio, iterations, residual)`` and the fitted exponent."""

    rows: list
    fit: SlopeFit | None
    bound: float | None = None
    degenerate: bool = False
    error: str | None = None

    @property
    def passed(self) -> bool:
        if self.degenerate:
            return True
        if self.fit is None or self.bound is None:
            return False
        return self.fit.slope >= self.bound - 0.2

    def csv_rows(self) -> list[list]:
        return [[r["h"], r["theta"], r["psi_norm"], r["ratio"], r["iterations"], r["residual"]] for r in self.rows]


CSV_HEADER = ["h", "theta", "psi_norm", "ratio", "iterations", "residual"]


def decay_study(Q: DivergenceFormCoefficient, q: DivergenceFormCoefficient, frame: ZetaFrame,
                hs: Sequence[float], amplitude: str | Callable = "one", m: int = 2,
                theta: float | Callable[[float], tuple[float, float]] = 0.0,
                cut: Cutoff | None = None, bound: float | None = None, transpose: bool = False,
                tol: float = 1e-10, max_iter: int = 200) -> DecayReport:
    """Solve at each ``h`` and fit ``log2 ||psi||_{X^{m/2}}`` against ``log2 h``.

    ``theta`` is a fixed angle or a selector returning ``(tau, theta)``
    for a given ``h``; the selected ``tau`` replaces ``h``.
    """
    spec = Q.spec
    cut = build_cutoff(spec) if cut is None else cut
    rows = []
    if Q.is_zero and q.is_zero:
        for h in hs:
            rows.append(dict(h=h, theta=0.0 if callable(theta) else theta, psi_norm=0.0, ratio=0.0,
                             iterations=0, residual=0.0))
        return DecayReport(rows, None, bound, degenerate=True)
    try:
        for h in hs:
            if callable(theta):
                tau, th = theta(h)
            else:
                tau, th = min(h, tau_max(frame)), theta
            z = zeta_rot(frame, 2 if transpose else 1, tau, th)
            if callable(amplitude):
                a = amplitude(spec, frame, th)
            elif amplitude == "one":
                a = amplitude_one(spec)
            elif amplitude == "linear":
                a = amplitude_linear(spec, frame, th)
            else:
                raise ValueError(f"unknown amplitude {amplitude!r}")
            f = rhs_from_amplitude(a, Q, q, tau, z, transpose, m, principal=False)
            sol = solve_psi(f, Q, q, tau, z, transpose, tol, max_iter, m, cut, amplitude=a)
            nrm = xlambda_norm(sol.psi, XLambdaWeight(tau, z, m / 2))
            rows.append(dict(h=tau, theta=th, psi_norm=nrm, ratio=sol.ratio, iterations=sol.iterations,
                             residual=sol.residual / sol.rhs_norm if sol.rhs_norm else 0.0))
    except (NonContraction, MaxIterExceeded) as exc:
        fit = fit_slope([r["h"] for r in rows], [r["psi_norm"] for r in rows]) if len(rows) >= 2 else None
        return DecayReport(rows, fit, bound, error=str(exc))
    fit = fit_slope([r["h"] for r in rows], [r["psi_norm"] for r in rows])
    return DecayReport(rows, fit, bound)
