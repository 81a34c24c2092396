"""Cutoffs, the conjugated operator and its cutoff inverses, coefficient actions.

All operators act in the conjugated frame: a field ``w`` stands for
``exp(x.zeta/h) w`` and the exponential itself is never sampled. With
``D = -i grad`` the conjugated Laplacian is ``P(hD) = -h^2 Lap - 2h zeta.grad``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import i0e, roots_legendre

from . import kernels
from .frames import XLambdaWeight, Zeta, symbol_on_grid, xlambda_norm
from .spectral import GridFunction, GridSpec, derivative, forward, inverse, monomial, product

__all__ = [
    "Cutoff",
    "build_cutoff",
    "spectral_tail",
    "CoefficientPiece",
    "DivergenceFormCoefficient",
    "smooth_bump",
    "holder_bump",
    "load_coefficients",
    "coefficients_from_json",
    "apply_P",
    "apply_Iphi",
    "apply_Jphi",
    "apply_coefficient",
    "apply_coefficient_transpose",
    "coefficient_action",
    "divergence_transpose",
    "smooth_multiply",
    "ClampOverflow",
]

CLAMP_FRACTION = 1e-3
DELTA_FACTOR = 1e-8


class ClampOverflow(RuntimeError):
    """Too many lattice modes sit on the characteristic set."""


# ---------------------------------------------------------------- cutoffs


def _kaiser_density(t: np.ndarray, beta: float, gamma: float) -> np.ndarray:
    """Bell-shaped density on ``(0, 1)`` vanishing to all orders at the ends."""
    u = 2.0 * t - 1.0
    w = np.clip(1.0 - u * u, 0.0, None)
    out = np.zeros_like(w)
    pos = w > 0
    sw = np.sqrt(w[pos])
    out[pos] = i0e(beta * sw) * np.exp(beta * (sw - 1.0) - gamma / w[pos])
    return out


def _integrated_step(t: np.ndarray, beta: float, gamma: float, nodes: int = 160) -> np.ndarray:
    """Normalized running integral of the density, by Gauss-Legendre on ``[0, t]``."""
    x, wts = roots_legendre(nodes)
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    s = 0.5 * (x[None, :] + 1.0) * t[:, None]
    vals = (_kaiser_density(s, beta, gamma) * wts[None, :]).sum(axis=1) * 0.5 * t
    total = (_kaiser_density(0.5 * (x + 1.0), beta, gamma) * wts).sum() * 0.5
    return vals / total


def _exp_step(t: np.ndarray) -> np.ndarray:
    """Classical smooth step built from ``exp(-1/t)``."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.where(t < 1, 1.0 - t, 1.0)), 0.0)
    return a / (a + b)


def radial_step(r: np.ndarray, r1: float, r2: float, profile: str = "kaiser",
                beta: float = 18.0, gamma: float = 0.05) -> np.ndarray:
    """Radial profile equal to 1 for ``r <= r1`` and 0 for ``r >= r2``."""
    r = np.asarray(r, dtype=float)
    flat = r.ravel()
    uniq, inv = np.unique(flat, return_inverse=True)
    t = (uniq - r1) / (r2 - r1)
    inside = (t > 0) & (t < 1)
    step = np.where(t >= 1, 1.0, 0.0)
    if np.any(inside):
        if profile == "kaiser":
            step[inside] = _integrated_step(t[inside], beta, gamma)
        elif profile == "exp":
            step[inside] = _exp_step(t[inside])
        else:
            raise ValueError(f"unknown cutoff profile {profile!r}")
    return (1.0 - step)[inv].reshape(r.shape)


def spectral_tail(u: GridFunction) -> float:
    """Largest spectral magnitude on the Nyquist faces relative to the largest overall."""
    c = np.abs(u.spectral())
    half = u.spec.N // 2
    faces = np.zeros(u.spec.shape, dtype=bool)
    for ax in range(u.spec.d):
        sl = [slice(None)] * u.spec.d
        sl[ax] = half
        faces[tuple(sl)] = True
    return float(c[faces].max() / c.max())


@dataclass(frozen=True)
class Cutoff:
    """Radial cutoff on the grid.

    Attributes
    ----------
    phi : GridFunction
        Physical samples, 1 on ``|x| <= r1`` and 0 on ``|x| >= r2``.
    r1, r2 : float
    tail : float
        Relative spectral magnitude on the Nyquist faces.
    profile : str
    """

    phi: GridFunction
    r1: float
    r2: float
    tail: float
    profile: str
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def values(self) -> np.ndarray:
        return self.phi.values.real

    def complement_hat(self) -> np.ndarray:
        """Spectrum of ``1 - phi``, supported where ``phi`` is not identically 1."""
        if "chi" not in self._cache:
            self._cache["chi"] = GridFunction(self.phi.spec, 1.0 - self.values, "physical").spectral()
        return self._cache["chi"]


DEFAULT_RADII = (1.0, 3.1)
DEFAULT_BETA = 18.0
DEFAULT_GAMMA = 0.05


def build_cutoff(spec: GridSpec, r1: float | None = None, r2: float | None = None,
                 profile: str = "kaiser", beta: float = DEFAULT_BETA, gamma: float = DEFAULT_GAMMA) -> Cutoff:
    """Smooth radial cutoff between ``r1`` and ``r2``.

    ``profile="kaiser"`` integrates a Kaiser-Bessel bell damped by
    ``exp(-gamma/(1-u^2))``; it is C-infinity, exactly flat outside the
    bridge and its Nyquist tail at ``N = 64`` is below 1e-10.
    ``profile="exp"`` is the classical ``exp(-1/t)`` step.

    Raises
    ------
    ValueError
        Unless ``R < r1 < r2 < L/2``.
    """
    r1 = DEFAULT_RADII[0] if r1 is None else float(r1)
    r2 = DEFAULT_RADII[1] if r2 is None else float(r2)
    if not spec.R < r1 < r2 < spec.L / 2:
        raise ValueError(f"need R={spec.R} < r1={r1} < r2={r2} < L/2={spec.L / 2}")
    key = ("cutoff", r1, r2, profile, beta, gamma)
    if key not in spec._cache:
        vals = radial_step(spec.radius(), r1, r2, profile, beta, gamma)
        phi = GridFunction(spec, vals.astype(complex), "physical")
        spec._cache[key] = Cutoff(phi, r1, r2, spectral_tail(phi), profile)
    return spec._cache[key]


# ---------------------------------------------------------------- coefficients


def smooth_bump(spec: GridSpec, center: Sequence[float], radius: float, amplitude: complex = 1.0) -> np.ndarray:
    """``A exp(1 - 1/(1 - |x-c|^2/rho^2))`` inside the ball, 0 outside."""
    s = _dist2(spec, center) / radius**2
    out = np.zeros(spec.shape, dtype=complex)
    inside = s < 1
    out[inside] = amplitude * np.exp(1.0 - 1.0 / (1.0 - s[inside]))
    return out


def holder_bump(spec: GridSpec, center: Sequence[float], radius: float, amplitude: complex = 1.0,
                theta: float = 0.5) -> np.ndarray:
    """``A (1 - |x-c|^2/rho^2)_+^theta``, Hölder of order ``theta`` across the sphere."""
    s = _dist2(spec, center) / radius**2
    return amplitude * np.clip(1.0 - s, 0.0, None) ** theta + 0j


def _dist2(spec: GridSpec, center: Sequence[float]) -> np.ndarray:
    if len(center) != spec.d:
        raise ValueError("center has wrong dimension")
    out = np.zeros(spec.shape)
    for c, ax in zip(center, spec.coord_axes()):
        out = out + (ax - c) ** 2
    return out


@dataclass(frozen=True)
class CoefficientPiece:
    """One divergence-form piece ``D^beta f``.

    Attributes
    ----------
    beta : tuple of int
    field : GridFunction
        The Hölder function ``f``, supported in the domain ball.
    theta : float
        Hölder exponent of ``f`` (1 for smooth pieces).
    component : int or None
        Vector component for ``Q`` pieces, ``None`` for ``q``.
    """

    beta: tuple
    field: GridFunction
    theta: float = 1.0
    component: int | None = None

    def support_defect(self) -> float:
        """``max |f|`` outside the domain ball."""
        spec = self.field.spec
        v = np.abs(self.field.physical())
        out = ~spec.interior_mask()
        return float(v[out].max()) if np.any(out) else 0.0


@dataclass
class DivergenceFormCoefficient:
    """A scalar ``q = sum D^beta q_beta`` or vector ``Q_j = sum D^beta Q_j,beta``.

    Attributes
    ----------
    spec : GridSpec
    kind : {"scalar", "vector"}
    pieces : list of CoefficientPiece
    """

    spec: GridSpec
    kind: str = "scalar"
    pieces: list = field(default_factory=list)
    _synth: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("scalar", "vector"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        for p in self.pieces:
            if self.kind == "vector" and p.component is None:
                raise ValueError("vector coefficient pieces need a component")

    @property
    def is_zero(self) -> bool:
        return not self.pieces

    def validate(self, m: int, tol: float = 1e-12) -> None:
        """Order window and support check for every piece."""
        limit = m if self.kind == "scalar" else m - 1
        for p in self.pieces:
            if sum(p.beta) > limit:
                raise ValueError(f"piece order {sum(p.beta)} exceeds {limit}")
            if p.support_defect() > tol:
                raise ValueError("coefficient piece not supported in the domain ball")

    def components(self) -> list[GridFunction]:
        """Synthesized fields: one entry for ``q``, ``d`` entries for ``Q``."""
        if "fields" not in self._synth:
            n = 1 if self.kind == "scalar" else self.spec.d
            acc = [np.zeros(self.spec.shape, dtype=complex) for _ in range(n)]
            for p in self.pieces:
                j = 0 if self.kind == "scalar" else p.component
                acc[j] = acc[j] + derivative(p.field, p.beta).spectral()
            self._synth["fields"] = [GridFunction(self.spec, a, "spectral") for a in acc]
        return self._synth["fields"]

    def field(self, j: int = 0) -> GridFunction:
        return self.components()[j]

    def padded(self, j: int = 0) -> np.ndarray:
        """Physical samples of component ``j`` on the ``3N/2`` grid, cached."""
        key = ("padded", j)
        if key not in self._synth:
            self._synth[key] = _padded_physical(self.spec, self.field(j).spectral())
        return self._synth[key]

    def scaled(self, c: complex) -> "DivergenceFormCoefficient":
        pieces = [CoefficientPiece(p.beta, p.field * c, p.theta, p.component) for p in self.pieces]
        return DivergenceFormCoefficient(self.spec, self.kind, pieces)

    def __sub__(self, other: "DivergenceFormCoefficient") -> "DivergenceFormCoefficient":
        return self + other.scaled(-1.0)

    def __add__(self, other: "DivergenceFormCoefficient") -> "DivergenceFormCoefficient":
        if self.kind != other.kind:
            raise ValueError("cannot combine scalar and vector coefficients")
        return DivergenceFormCoefficient(self.spec, self.kind, list(self.pieces) + list(other.pieces))

    @classmethod
    def zero(cls, spec: GridSpec, kind: str = "scalar") -> "DivergenceFormCoefficient":
        return cls(spec, kind, [])


def _padded_physical(spec: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    from .spectral import _pad, _padded_spec, inverse

    big = _padded_spec(spec)
    return inverse(big, _pad(spec, coeffs, big.N))


def _padded_product_with(spec: GridSpec, padded_phys: np.ndarray, w: GridFunction) -> np.ndarray:
    from .spectral import _pad, _padded_spec, _truncate, forward, inverse

    big = _padded_spec(spec)
    wp = inverse(big, _pad(spec, w.spectral(), big.N))
    return _truncate(spec, forward(big, padded_phys * wp))


def coefficients_from_json(spec: GridSpec, pieces: list) -> tuple[DivergenceFormCoefficient, DivergenceFormCoefficient]:
    """Build ``(Q, q)`` from a list of piece descriptions.

    Each entry is ``{"component": "q" | j, "beta": [...], "profile": {"type":
    "smooth_bump" | "holder_bump", "center": [...], "radius": r,
    "amplitude": a, "theta": t}}``. Complex amplitudes may be given as
    ``[re, im]``.
    """
    qp, Qp = [], []
    for entry in pieces:
        prof = entry["profile"]
        amp = prof.get("amplitude", 1.0)
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        kind = prof["type"]
        if kind == "smooth_bump":
            vals, theta = smooth_bump(spec, prof["center"], prof["radius"], amp), 1.0
        elif kind == "holder_bump":
            theta = float(prof.get("theta", 0.5))
            vals = holder_bump(spec, prof["center"], prof["radius"], amp, theta)
        else:
            raise ValueError(f"unknown profile type {kind!r}")
        beta = tuple(int(b) for b in entry.get("beta", [0] * spec.d))
        if len(beta) != spec.d:
            raise ValueError(f"beta {beta} has wrong dimension")
        comp = entry.get("component", "q")
        gf = GridFunction(spec, vals, "physical")
        if comp == "q":
            qp.append(CoefficientPiece(beta, gf, theta, None))
        else:
            j = int(comp)
            if not 0 <= j < spec.d:
                raise ValueError(f"component {comp} out of range")
            Qp.append(CoefficientPiece(beta, gf, theta, j))
    return (DivergenceFormCoefficient(spec, "vector", Qp), DivergenceFormCoefficient(spec, "scalar", qp))


def load_coefficients(spec: GridSpec, path: str | Path):
    """Read a coefficient description file, see :func:`coefficients_from_json`."""
    return coefficients_from_json(spec, json.loads(Path(path).read_text()))


# ---------------------------------------------------------------- operators


def _zvec(zeta) -> np.ndarray:
    return zeta.vec if isinstance(zeta, Zeta) else np.asarray(zeta, dtype=complex)


def apply_P(u: GridFunction, h: float, zeta, power: int = 1) -> GridFunction:
    """``P(hD)^power u``."""
    P = symbol_on_grid(u.spec, Zeta(_zvec(zeta)), h)
    return GridFunction(u.spec, u.spectral() * P**power, "spectral")


@dataclass
class InverseReport:
    """Bookkeeping of one regularized division.

    Attributes
    ----------
    clamped : int
        Modes with ``|P| < delta`` lifted to magnitude ``delta``.
    deflated : int
        Modes whose right-hand side was cancelled by exterior sources.
    """

    clamped: int = 0
    deflated: int = 0


def _check_clamp(spec: GridSpec, clamped: int) -> None:
    if clamped > CLAMP_FRACTION * spec.size:
        raise ClampOverflow(f"{clamped} clamped modes exceed {CLAMP_FRACTION:.1%} of the lattice")


def _deflate(cut: Cutoff, ghat: np.ndarray, modes: np.ndarray) -> np.ndarray:
    """Cancel ``ghat`` on ``modes`` with sources ``(1 - phi) exp(i x.xi_j)``.

    The sources vanish where ``phi = 1``, so the modified right-hand side
    agrees with the original there.
    """
    spec = cut.phi.spec
    N = spec.N
    chi = cut.complement_hat()
    idx = np.array(np.unravel_index(modes, spec.shape)).T
    diff = (idx[:, None, :] - idx[None, :, :]) % N
    G = chi[tuple(diff[..., a] for a in range(spec.d))]
    rhs = -ghat.ravel()[modes]
    coef = np.linalg.solve(G, rhs)
    # sum_j coef_j chi(xi - xi_j) as one circular convolution
    sparse = np.zeros_like(ghat)
    sparse.ravel()[modes] = coef
    shifted = forward(spec, (1.0 - cut.values) * inverse(spec, sparse)) * spec.L ** spec.d
    return ghat + shifted


def inverse_symbol(spec: GridSpec, ghat: np.ndarray, h: float, zeta, cut: Cutoff | None = None,
                   deflate_below: float | None = None, report: InverseReport | None = None) -> np.ndarray:
    """Regularized ``P(hD)^{-1}`` on a spectrum, with optional deflation.

    Modes with ``|P| < deflate_below`` (and always the clamped ones) are
    removed from ``ghat`` by exterior sources built from ``cut`` before the
    division.
    """
    z = _zvec(zeta)
    delta = DELTA_FACTOR * h
    if cut is not None:
        P = symbol_on_grid(spec, Zeta(z), h)
        thresh = max(delta, deflate_below or 0.0)
        modes = np.flatnonzero(np.abs(P) < thresh)
        if modes.size:
            _check_clamp(spec, modes.size)
            ghat = _deflate(cut, ghat, modes)
            if report is not None:
                report.deflated += int(modes.size)
    out, clamped = kernels.divide_symbol(spec, ghat, z, h, delta, 1.0)
    _check_clamp(spec, clamped)
    if report is not None:
        report.clamped += clamped
    if cut is not None:
        out.ravel()[modes] = 0.0
    return out


DEFLATE_FACTOR = 0.25


def apply_Iphi(u: GridFunction, h: float, zeta, cut: Cutoff, deflate_factor: float = DEFLATE_FACTOR,
               report: InverseReport | None = None) -> GridFunction:
    """``I_phi u = phi P(hD)^{-1} (phi u)`` with ``P(hD) I_phi u = u`` where ``phi = 1``.

    Lattice modes with ``|P| < deflate_factor * h`` carry no mass in the
    continuum but dominate a lattice sum; their share of ``phi u`` is
    cancelled by sources supported where ``phi < 1`` before dividing.
    Modes with ``|P| < 1e-8 h`` are also clamped to that magnitude.

    Raises
    ------
    ClampOverflow
        If more than 0.1% of the lattice needs clamping or deflation.
    """
    spec = u.spec
    phi = cut.values
    g = GridFunction(spec, phi * u.physical(), "physical").spectral()
    w = inverse_symbol(spec, g, h, zeta, cut, deflate_factor * h, report)
    wphys = GridFunction(spec, w, "spectral").physical()
    return GridFunction(spec, phi * wphys, "physical")


def apply_Jphi(u: GridFunction, h: float, zeta, cut: Cutoff, report: InverseReport | None = None) -> GridFunction:
    """``J_phi u = phi |P(hD)|^{-1/2} u`` with regularized division."""
    spec = u.spec
    out, clamped = kernels.divide_symbol(spec, u.spectral(), _zvec(zeta), h, DELTA_FACTOR * h, 0.5)
    _check_clamp(spec, clamped)
    if report is not None:
        report.clamped += clamped
    return GridFunction(spec, cut.values * GridFunction(spec, out, "spectral").physical(), "physical")


def shifted_derivative(u: GridFunction, h: float, zeta, gamma: Sequence[int]) -> GridFunction:
    """``(D + zeta/(ih))^gamma u``."""
    spec = u.spec
    z = _zvec(zeta)
    mult = np.ones(spec.shape, dtype=complex)
    for j, (g, ax) in enumerate(zip(gamma, spec.freq_axes())):
        if g:
            mult = mult * (ax + z[j] / (1j * h)) ** g
    return GridFunction(spec, u.spectral() * mult, "spectral")


def apply_coefficient(c: DivergenceFormCoefficient, u: GridFunction, h: float, zeta,
                      gamma: Sequence[int] | None = None, component: int = 0) -> GridFunction:
    """``(sum_pieces D^beta f) * (D + zeta/(ih))^gamma u``, products dealiased."""
    spec = u.spec
    gamma = tuple(gamma) if gamma is not None else (0,) * spec.d
    if c.is_zero:
        return GridFunction(spec, np.zeros(spec.shape, dtype=complex), "spectral")
    w = shifted_derivative(u, h, zeta, gamma) if any(gamma) else u
    out = _padded_product_with(spec, c.padded(component), w)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite coefficient action")
    return GridFunction(spec, out, "spectral")


def apply_coefficient_transpose(Q: DivergenceFormCoefficient, v: GridFunction, h: float, zeta) -> GridFunction:
    """Transpose of ``u -> Q.(zeta/(ih) + D) u`` for the bilinear pairing.

    Equals ``-(zeta/(ih) + D).(Q v)``; at ``zeta = 0`` this is ``-D.(Q v)``.
    """
    spec = v.spec
    acc = np.zeros(spec.shape, dtype=complex)
    if Q.is_zero:
        return GridFunction(spec, acc, "spectral")
    z = _zvec(zeta)
    for j, ax in enumerate(spec.freq_axes()):
        prod = _padded_product_with(spec, Q.padded(j), v)
        shift = z[j] / (1j * h) if h else 0.0
        acc = acc - prod * (ax + shift)
    return GridFunction(spec, acc, "spectral")


def divergence_transpose(Q: DivergenceFormCoefficient, v: GridFunction) -> GridFunction:
    """``-D.(Q v)``, the transpose of ``u -> Q.Du`` under ``<f, g> = int f g``."""
    spec = v.spec
    acc = np.zeros(spec.shape, dtype=complex)
    for j, ax in enumerate(spec.freq_axes()):
        acc = acc - _padded_product_with(spec, Q.padded(j), v) * ax
    return GridFunction(spec, acc, "spectral")


def coefficient_action(Q: DivergenceFormCoefficient, q: DivergenceFormCoefficient, u: GridFunction,
                       h: float, zeta, transpose: bool = False) -> GridFunction:
    """First-order part of the conjugated operator, ``Q.(zeta/(ih) + D) u + q u``.

    With ``transpose`` the conjugated transpose ``-(zeta/(ih) + D).(Q u) + q u``
    is applied instead.
    """
    spec = u.spec
    acc = np.zeros(spec.shape, dtype=complex)
    if not q.is_zero:
        acc = acc + apply_coefficient(q, u, h, zeta).spectral()
    if not Q.is_zero:
        if transpose:
            acc = acc + apply_coefficient_transpose(Q, u, h, zeta).spectral()
        else:
            for j in range(spec.d):
                e = tuple(1 if i == j else 0 for i in range(spec.d))
                acc = acc + apply_coefficient(Q, u, h, zeta, e, component=j).spectral()
    return GridFunction(spec, acc, "spectral")


@dataclass
class SmoothMultiplyResult:
    product: GridFunction
    ratio: float


def smooth_multiply(v: GridFunction, u: GridFunction, w: XLambdaWeight) -> SmoothMultiplyResult:
    """Dealiased product ``v u`` and the ratio of its X^lambda norm to that of ``u``."""
    out = product(v, u)
    denom = xlambda_norm(u, w)
    ratio = xlambda_norm(out, w) / denom if denom > 0 else 0.0
    return SmoothMultiplyResult(out, ratio)
