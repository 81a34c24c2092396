"""Complex frequencies, rotated frames, the conjugated symbol and X^lambda norms.

A complex frequency ``zeta = mu1 + i mu2`` with orthonormal real ``mu1, mu2``
satisfies ``zeta . zeta = 0``. The conjugated Laplacian has symbol
``P(h xi) = |h xi|^2 - 2i zeta . h xi`` and the weighted spaces ``X^lambda``
carry the weight ``(h + |P(h xi)|)^lambda``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .spectral import GridFunction, GridSpec, weighted_norm
from . import kernels

__all__ = [
    "ProblemSpec",
    "ZetaFrame",
    "Zeta",
    "XLambdaWeight",
    "make_frame",
    "rotate_frame",
    "zeta_rot",
    "p_symbol",
    "symbol_on_grid",
    "xlambda_norm",
    "check_hypotheses",
    "AdmissibilityReport",
]

_TOL = 1e-12


def _norm(v: np.ndarray) -> float:
    # cheaper than np.linalg.norm for the short real vectors used here
    return math.sqrt(float(v @ v))


@dataclass(frozen=True)
class ProblemSpec:
    """Orders and exponents of one recovery problem.

    Attributes
    ----------
    m : int
        Half order of the polyharmonic operator.
    d : int
        Dimension.
    s : float
        Sobolev smoothness deficit of the coefficients.
    p : float
        Integrability exponent of the coefficients.
    theta_h : float
        Hölder exponent of the coefficient pieces.
    eps : float
        Slack with ``s = m/2 + 1 - 1.5 eps``.
    """

    m: int = 2
    d: int = 3
    s: float = 1.625
    p: float = 12.0
    theta_h: float = 0.5
    eps: float = 0.25

    @classmethod
    def from_eps(cls, m: int = 2, d: int = 3, eps: float = 0.25, p: float = 12.0, theta_h: float = 0.5):
        """Problem with ``s`` tied to ``eps``."""
        return cls(m=m, d=d, s=m / 2 + 1 - 1.5 * eps, p=p, theta_h=theta_h, eps=eps)


@dataclass(frozen=True)
class AdmissibilityReport:
    """Pass/fail per hypothesis plus derived exponents."""

    checks: dict
    t: float | None
    t_prime: float | None
    eps: float

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def check_hypotheses(ps: ProblemSpec) -> AdmissibilityReport:
    """Evaluate the standing hypotheses on orders and exponents.

    Notes
    -----
    ``t`` solves ``1/t = 1 - m/d`` when ``m/d < 1/2`` and ``1/t = 1/2`` when
    ``m/d > 1/2``; at ``m/d = 1/2`` any ``t`` in ``(2, inf)`` works and
    ``None`` is reported. ``t'`` is the conjugate exponent.
    """
    checks = {
        "m>=2": ps.m >= 2,
        "d>=3": ps.d >= 3,
        "p>=2": ps.p >= 2,
        "s<m/2+1": ps.s < ps.m / 2 + 1,
        "1/p+(s-m)/d<0": 1.0 / ps.p + (ps.s - ps.m) / ps.d < 0,
        "0<eps<1/3": 0 < ps.eps < 1.0 / 3.0,
    }
    ratio = ps.m / ps.d
    if ratio < 0.5:
        inv_t = 1.0 - ratio
    elif ratio > 0.5:
        inv_t = 0.5
    else:
        inv_t = None
    t = None if inv_t is None else 1.0 / inv_t
    t_prime = None if inv_t is None or inv_t == 1 else 1.0 / (1.0 - inv_t)
    return AdmissibilityReport(checks, t, t_prime, ps.eps)


@dataclass(frozen=True)
class ZetaFrame:
    """A frequency ``xi0`` with an orthonormal pair ``mu1, mu2`` orthogonal to it."""

    xi0: np.ndarray
    mu1: np.ndarray
    mu2: np.ndarray

    def check(self, tol: float = _TOL) -> None:
        for v in (self.mu1, self.mu2):
            if abs(float(v @ v) - 1) > tol or abs(float(v @ self.xi0)) > tol * max(1.0, _norm(self.xi0)):
                raise ValueError("frame is not orthonormal or not orthogonal to xi0")
        if abs(float(self.mu1 @ self.mu2)) > tol:
            raise ValueError("frame vectors are not orthogonal")

    def conjugate(self) -> "ZetaFrame":
        """Frame with ``mu2`` reversed, selecting the other tangential component."""
        return ZetaFrame(self.xi0, self.mu1, -self.mu2)


@dataclass(frozen=True)
class Zeta:
    """Complex vector ``zeta`` with ``zeta . zeta = 0`` and unit real and imaginary parts."""

    vec: np.ndarray

    @property
    def re(self) -> np.ndarray:
        return self.vec.real

    @property
    def im(self) -> np.ndarray:
        return self.vec.imag

    def defects(self) -> tuple[float, float, float]:
        """``(|zeta.zeta|, ||Re zeta| - 1|, ||Im zeta| - 1|)``."""
        v = self.vec
        return (
            abs(complex(v @ v)),
            abs(_norm(v.real) - 1.0),
            abs(_norm(v.imag) - 1.0),
        )


@dataclass(frozen=True)
class XLambdaWeight:
    """The weight ``(h + |P(h xi)|)^lam`` for a given ``h`` and ``zeta``."""

    h: float
    zeta: Zeta
    lam: float


def make_frame(xi0: Sequence[float]) -> ZetaFrame:
    """Deterministic orthonormal completion of ``xi0``.

    Gram-Schmidt is applied to the two standard basis vectors with the
    smallest ``|component along xi0|``, ties broken by lowest index.
    """
    xi0 = np.asarray(xi0, dtype=float)
    norm = _norm(xi0)
    if norm == 0:
        raise ValueError("xi0 must be nonzero")
    if xi0.size < 3:
        raise ValueError("frames need dimension at least 3")
    n = xi0 / norm
    order = sorted(range(xi0.size), key=lambda j: (abs(n[j]), j))
    basis = []
    for j in order[:2]:
        e = np.zeros(xi0.size)
        e[j] = 1.0
        v = e - (e @ n) * n
        for b in basis:
            v = v - (v @ b) * b
        basis.append(v / _norm(v))
    frame = ZetaFrame(xi0, basis[0], basis[1])
    frame.check()
    return frame


def rotate_frame(frame: ZetaFrame, theta: float) -> tuple[np.ndarray, np.ndarray]:
    """``(mu1(theta), mu2(theta))``, the pair rotated by ``theta`` in its plane."""
    c, s = math.cos(theta), math.sin(theta)
    return frame.mu1 * c - frame.mu2 * s, frame.mu1 * s + frame.mu2 * c


def tau_max(frame: ZetaFrame) -> float:
    return 1.0 / (2.0 * _norm(frame.xi0))


def zeta_rot(frame: ZetaFrame, k: int, tau: float, theta: float) -> Zeta:
    """The rotated complex frequencies ``zeta^1, zeta^2`` of scale ``tau``.

    ``zeta^1 = mu1(theta) + i sqrt(1 - tau^2|xi0|^2/4) mu2(theta) - i tau xi0/2`` and
    ``zeta^2`` flips the signs of the first two terms, so that
    ``zeta^1 + zeta^2 = -i tau xi0``.
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    if not 0 < tau <= tau_max(frame) * (1 + 1e-15):
        raise ValueError(f"tau={tau} outside (0, {tau_max(frame)}]")
    m1, m2 = rotate_frame(frame, theta)
    xi0 = frame.xi0
    root = math.sqrt(max(0.0, 1.0 - tau * tau * float(xi0 @ xi0) / 4.0))
    sign = 1.0 if k == 1 else -1.0
    return Zeta(sign * m1 + 1j * (sign * root) * m2 - 0.5j * tau * xi0)


def p_symbol(zeta: Zeta | np.ndarray, h: float, xi: Sequence[float]) -> complex:
    """``|h xi|^2 - 2i zeta . (h xi)``."""
    z = zeta.vec if isinstance(zeta, Zeta) else np.asarray(zeta)
    hx = h * np.asarray(xi, dtype=float)
    return complex(hx @ hx - 2j * (z @ hx))


def symbol_on_grid(spec: GridSpec, zeta: Zeta, h: float) -> np.ndarray:
    """``P(h xi)`` over the whole lattice."""
    out = (h * h) * spec.freq_norm2().astype(complex)
    for zj, ax in zip(zeta.vec, spec.freq_axes()):
        out = out - (2j * h * zj) * ax
    return out


def xlambda_norm(u: GridFunction, w: XLambdaWeight) -> float:
    """``(L^-d sum |u_hat|^2 (h + |P(h xi)|)^(2 lam))^(1/2)``; ``lam = 0`` gives L2."""
    if w.lam == 0:
        return weighted_norm(u.spec, u.spectral())
    return math.sqrt(kernels.xlambda_sq(u.spec, u.spectral(), w.zeta.vec, w.h, w.lam))
