"""Bilinear forms, form differences of CGO pairs and coefficient recovery.

The data of the inverse problem is represented at the level of forms: for
two operators sharing the same principal part, the difference of their
forms evaluated on a pair of CGO solutions only involves the coefficient
differences. Every pairing here is an exact torus integral of lattice
trigonometric polynomials, evaluated by quadrature on a ``2N`` grid.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .averaging import select_theta
from .fitting import fit_slope, richardson
from .frames import Zeta, ZetaFrame, make_frame, rotate_frame, tau_max
from .multipliers import (
    CoefficientPiece,
    Cutoff,
    DivergenceFormCoefficient,
    build_cutoff,
    shifted_derivative,
    smooth_bump,
)
from .solver import amplitude_linear, amplitude_one, rhs_from_amplitude, solve_psi
from .spectral import GridFunction, GridSpec, _pad, derivative, inverse, monomial, reflect

__all__ = [
    "FormVariant",
    "b0_form",
    "ConjugatedState",
    "FrameMismatch",
    "frame_for",
    "pair_zetas",
    "form_difference",
    "nine_terms",
    "TERM_NAMES",
    "TERM_BOUNDS",
    "NineTermSweep",
    "nine_term_sweep",
    "RecoverySample",
    "RecoveryRun",
    "cgo_pair",
    "recover_Q_component",
    "recover_q",
    "recover_potential_transform",
    "calibrate_phase",
    "curl_test",
    "potential_from_gradient",
    "Reconstruction",
    "reconstruct_field",
    "frequency_box",
]

PHASES = (1.0 + 0j, -1.0 + 0j, 1j, -1j)
LOW_CONFIDENCE = 0.05


# ---------------------------------------------------------------- B0 variants


@dataclass(frozen=True)
class FormVariant:
    """Principal bilinear form: ``"navier"`` or ``"coercive"``."""

    tag: str = "navier"

    def __post_init__(self):
        if self.tag not in ("navier", "coercive"):
            raise ValueError(f"unknown form variant {self.tag!r}")


def _multi_indices(d: int, m: int):
    for alpha in itertools.product(range(m + 1), repeat=d):
        if sum(alpha) == m:
            yield alpha


def b0_form(u: GridFunction, v: GridFunction, variant: FormVariant | str = "navier", m: int = 2) -> complex:
    """Principal form ``B0(u, v)`` by spectral quadrature on the torus.

    Navier: ``int (-Lap)^{m/2} u (-Lap)^{m/2} v`` for even ``m`` and
    ``int grad (-Lap)^{(m-1)/2} u . grad (-Lap)^{(m-1)/2} v`` for odd ``m``.
    Coercive: ``sum_{|alpha|=m} m!/alpha! int D^alpha u D^alpha v``.
    """
    variant = FormVariant(variant) if isinstance(variant, str) else variant
    spec = u.spec
    uh, vr = u.spectral(), reflect(spec, v.spectral())
    k2 = spec.freq_norm2()
    if variant.tag == "navier":
        if m % 2 == 0:
            mult = k2 ** (m // 2) * k2 ** (m // 2)
        else:
            inner_pow = k2 ** ((m - 1) // 2)
            # d_j <-> i xi_j on u and -i xi_j on the reflected v
            mult = sum(ax * ax for ax in spec.freq_axes()) * inner_pow * inner_pow
    else:
        mult = np.zeros(spec.shape, dtype=complex)
        for alpha in _multi_indices(spec.d, m):
            coef = math.factorial(m) / math.prod(math.factorial(a) for a in alpha)
            neg = tuple(alpha)
            mult = mult + coef * monomial(spec, alpha) * ((-1) ** sum(neg)) * monomial(spec, neg)
    return complex(np.sum(mult * uh * vr)) * spec.quad_weight


# ---------------------------------------------------------------- exact pairings


class FrameMismatch(ValueError):
    """The two CGO states do not share ``tau`` and a lattice ``xi0``."""


@dataclass
class ConjugatedState:
    """A solution written as ``exp(x.zeta/h)(a + psi)``."""

    amplitude: GridFunction
    psi: GridFunction
    zeta: Zeta
    h: float

    @classmethod
    def plain(cls, amplitude: GridFunction, zeta, h: float) -> "ConjugatedState":
        """State with ``psi`` forced to zero."""
        spec = amplitude.spec
        z = zeta if isinstance(zeta, Zeta) else Zeta(np.asarray(zeta, dtype=complex))
        return cls(amplitude, GridFunction(spec, np.zeros(spec.shape, dtype=complex), "spectral"), z, h)


def _fine(spec: GridSpec) -> GridSpec:
    if "fine" not in spec._cache:
        spec._cache["fine"] = GridSpec(spec.d, 2 * spec.N, spec.L, spec.R)
    return spec._cache["fine"]


class _Quadrature:
    """Exact integrals ``int A B C exp(-i x.xi0)`` of lattice polynomials.

    Three factors of band ``N/2`` and a shift ``|xi0|_inf < N/2`` stay below
    the ``2N`` grid's aliasing threshold, so the sum is exact.
    """

    def __init__(self, spec: GridSpec, xi0: np.ndarray):
        self.spec = spec
        big = _fine(spec)
        self.big = big
        k = np.rint(np.asarray(xi0) * spec.L / (2 * math.pi))
        if np.any(np.abs(k) >= spec.N // 2):
            raise FrameMismatch(f"xi0={tuple(xi0)} too large for exact pairing on N={spec.N}")
        phase = np.zeros(big.shape)
        for kj, ax in zip(np.asarray(xi0, dtype=float), big.coord_axes()):
            phase = phase + kj * ax
        self.weight = np.exp(-1j * phase) * big.dx ** big.d
        self._cache: dict = {}

    def fine(self, u: GridFunction) -> np.ndarray:
        key = id(u)
        if key not in self._cache:
            self._cache[key] = (u, inverse(self.big, _pad(self.spec, u.spectral(), self.big.N)))
        return self._cache[key][1]

    def triple(self, a: GridFunction, b: GridFunction, c: GridFunction) -> complex:
        return complex(np.sum(self.fine(a) * self.fine(b) * self.fine(c) * self.weight))


def pair_xi0(s1, s2, xi0: Sequence[float] | None = None, tol: float = 1e-9) -> np.ndarray:
    """Recover ``xi0`` from ``zeta^1 + zeta^2 = -i h xi0`` and validate it."""
    if abs(s1.h - s2.h) > tol * max(s1.h, s2.h):
        raise FrameMismatch(f"scales differ: {s1.h} vs {s2.h}")
    z = np.asarray(s1.zeta.vec) + np.asarray(s2.zeta.vec)
    x = 1j * z / s1.h
    if np.max(np.abs(x.imag)) > tol * max(1.0, np.max(np.abs(x.real))):
        raise FrameMismatch("zeta^1 + zeta^2 is not -i h times a real vector")
    x = x.real
    spec = s1.amplitude.spec
    k = x * spec.L / (2 * math.pi)
    if np.max(np.abs(k - np.rint(k))) > 1e-6:
        raise FrameMismatch(f"xi0={tuple(x)} is not a lattice vector")
    x = np.rint(k) * 2 * math.pi / spec.L
    if xi0 is not None and np.max(np.abs(x - np.asarray(xi0, dtype=float))) > 1e-6:
        raise FrameMismatch(f"states carry xi0={tuple(x)}, expected {tuple(xi0)}")
    return x


def _diff_fields(c1: DivergenceFormCoefficient, c2: DivergenceFormCoefficient) -> list[GridFunction] | None:
    if c1 is c2 or (c1.is_zero and c2.is_zero):
        return None
    n = 1 if c1.kind == "scalar" else c1.spec.d
    return [GridFunction(c1.spec, c1.field(j).spectral() - c2.field(j).spectral(), "spectral") for j in range(n)]


def form_difference(s1, s2, Q1: DivergenceFormCoefficient, q1: DivergenceFormCoefficient,
                    Q2: DivergenceFormCoefficient, q2: DivergenceFormCoefficient,
                    xi0: Sequence[float] | None = None) -> complex:
    """``(B_1 - B_2)(u_1, u_2)`` for CGO states ``s1, s2``.

    Equals ``<dQ.(zeta^1/(ih) + D) w1, e w2> + <dq w1, e w2>`` with
    ``w_k = a^k + psi^k`` and ``e = exp(-i x.xi0)``. The principal form
    cancels and does not enter.

    Raises
    ------
    FrameMismatch
        If the states do not share ``h`` and a lattice ``xi0``.
    """
    x = pair_xi0(s1, s2, xi0)
    spec = s1.amplitude.spec
    quad = _Quadrature(spec, x)
    w1 = s1.amplitude + s1.psi
    w2 = s2.amplitude + s2.psi
    total = 0j
    dQ = _diff_fields(Q1, Q2)
    dq = _diff_fields(q1, q2)
    if dQ is not None:
        for j in range(spec.d):
            e = tuple(1 if i == j else 0 for i in range(spec.d))
            total += quad.triple(dQ[j], shifted_derivative(w1, s1.h, s1.zeta, e), w2)
    if dq is not None:
        total += quad.triple(dq[0], w1, w2)
    return total


TERM_NAMES = ("I", "II", "III", "IV", "V", "VI", "VII", "VIII", "IX")

# lower bounds on the h-exponent of each bracket, as offsets (const, eps-coefficient)
TERM_BOUNDS = {
    "II": (0.0, 1.0),
    "III": (0.0, 1.0),
    "IV": (1.0, 1.0),
    "V": (1.0, 0.0),
    "VI": (1.0, 1.0),
    "VII": (1.0, 0.0),
    "VIII": (1.0, 1.0),
    "IX": (1.0, 0.0),
}


def nine_terms(s1, s2, Q1, q1, Q2, q2, xi0: Sequence[float] | None = None) -> dict[str, complex]:
    """The nine brackets whose sum is ``ih (B_1 - B_2)(u_1, u_2)``.

    ``I..IV`` carry ``zeta^1 . <dQ (a|psi)^1, e (a|psi)^2>``, ``V..VIII`` carry
    ``ih <dQ . D (a|psi)^1, e (a|psi)^2>`` and ``IX`` the zeroth-order part.
    """
    x = pair_xi0(s1, s2, xi0)
    spec = s1.amplitude.spec
    quad = _Quadrature(spec, x)
    h = s1.h
    z1 = np.asarray(s1.zeta.vec)
    a1, p1, a2, p2 = s1.amplitude, s1.psi, s2.amplitude, s2.psi
    out = {k: 0j for k in TERM_NAMES}
    dQ = _diff_fields(Q1, Q2)
    dq = _diff_fields(q1, q2)
    if dQ is not None:
        for j in range(spec.d):
            e = tuple(1 if i == j else 0 for i in range(spec.d))
            da1, dp1 = derivative(a1, e), derivative(p1, e)
            out["I"] += z1[j] * quad.triple(dQ[j], a1, a2)
            out["II"] += z1[j] * quad.triple(dQ[j], p1, a2)
            out["III"] += z1[j] * quad.triple(dQ[j], a1, p2)
            out["IV"] += z1[j] * quad.triple(dQ[j], p1, p2)
            out["V"] += 1j * h * quad.triple(dQ[j], da1, a2)
            out["VI"] += 1j * h * quad.triple(dQ[j], da1, p2)
            out["VII"] += 1j * h * quad.triple(dQ[j], dp1, a2)
            out["VIII"] += 1j * h * quad.triple(dQ[j], dp1, p2)
    if dq is not None:
        out["IX"] = 1j * h * quad.triple(dq[0], a1 + p1, a2 + p2)
    return out


@dataclass
class NineTermSweep:
    """Fitted ``h``-exponents of the nine brackets over a sweep.

    Brackets that vanish identically on every sample are reported as
    ``None`` and do not count against ``passed``.
    """

    hs: list
    values: dict
    exponents: dict
    bounds: dict
    slack: float = 0.2

    @property
    def passed(self) -> bool:
        for name, b in self.bounds.items():
            s = self.exponents.get(name)
            if s is not None and s < b - self.slack:
                return False
        return True


def nine_term_sweep(runs: Sequence[tuple[float, dict]], eps: float, slack: float = 0.2,
                    floor: float = 1e-300) -> NineTermSweep:
    """Fit each bracket's magnitude against ``h`` and attach the lower bounds."""
    hs = [h for h, _ in runs]
    values = {k: [t[k] for _, t in runs] for k in TERM_NAMES}
    exps, bounds = {}, {}
    for k in TERM_NAMES:
        mags = np.abs(np.asarray(values[k]))
        if k in TERM_BOUNDS:
            c, e = TERM_BOUNDS[k]
            bounds[k] = c + e * eps
        exps[k] = fit_slope(hs, mags).slope if np.all(mags > floor) and len(hs) >= 2 else None
    return NineTermSweep(hs, values, exps, bounds, slack)


# ---------------------------------------------------------------- CGO pairs


def frame_for(xi0: Sequence[float]) -> ZetaFrame:
    """``make_frame`` extended to ``xi0 = 0`` with the first two axes."""
    x = np.asarray(xi0, dtype=float)
    if np.any(x != 0):
        return make_frame(x)
    d = x.size
    e1, e2 = np.zeros(d), np.zeros(d)
    e1[0], e2[1] = 1.0, 1.0
    return ZetaFrame(x, e1, e2)


def _tau_limit(frame: ZetaFrame) -> float:
    return math.inf if not np.any(frame.xi0) else tau_max(frame)


def pair_zetas(frame: ZetaFrame, tau: float, theta: float) -> tuple[Zeta, Zeta]:
    """``zeta^1, zeta^2`` at ``(tau, theta)``, also for ``xi0 = 0``."""
    if not 0 < tau <= _tau_limit(frame) * (1 + 1e-15):
        raise ValueError(f"tau={tau} outside (0, {_tau_limit(frame)}]")
    m1, m2 = rotate_frame(frame, theta)
    xi0 = frame.xi0
    root = math.sqrt(max(0.0, 1.0 - tau * tau * float(xi0 @ xi0) / 4.0))
    z1 = m1 + 1j * root * m2 - 0.5j * tau * xi0
    z2 = -m1 - 1j * root * m2 - 0.5j * tau * xi0
    return Zeta(z1), Zeta(z2)


def _amplitude(spec: GridSpec, frame: ZetaFrame, kind) -> GridFunction:
    if callable(kind):
        return kind(spec, frame)
    if kind == "one":
        return amplitude_one(spec)
    if kind == "linear":
        return amplitude_linear(spec, frame, 0.0)
    raise ValueError(f"unknown amplitude {kind!r}")


def cgo_pair(Q1, q1, Q2, q2, frame: ZetaFrame, tau: float, theta: float, a1="one", a2="one",
             m: int = 2, cut: Cutoff | None = None, force_zero_psi: bool = False,
             tol: float = 1e-10, max_iter: int = 200):
    """Solve for ``psi^1`` with ``(Q1, q1)`` and ``psi^2`` with the transpose of ``(Q2, q2)``.

    Returns the two states and the two solver records (``None`` when
    ``psi`` is forced to zero).
    """
    spec = Q1.spec
    z1, z2 = pair_zetas(frame, tau, theta)
    A1, A2 = _amplitude(spec, frame, a1), _amplitude(spec, frame, a2)
    if force_zero_psi:
        return ConjugatedState.plain(A1, z1, tau), ConjugatedState.plain(A2, z2, tau), None, None
    cut = build_cutoff(spec) if cut is None else cut
    f1 = rhs_from_amplitude(A1, Q1, q1, tau, z1, False, m, principal=False)
    f2 = rhs_from_amplitude(A2, Q2, q2, tau, z2, True, m, principal=False)
    r1 = solve_psi(f1, Q1, q1, tau, z1, False, tol, max_iter, m, cut, amplitude=A1)
    r2 = solve_psi(f2, Q2, q2, tau, z2, True, tol, max_iter, m, cut, amplitude=A2)
    return ConjugatedState(A1, r1.psi, z1, tau), ConjugatedState(A2, r2.psi, z2, tau), r1, r2


# ---------------------------------------------------------------- recovery runs


@dataclass
class RecoverySample:
    h: float
    tau: float
    theta: float
    form_difference: complex
    scaled: complex
    terms: dict
    residuals: tuple = ()
    iterations: tuple = ()


@dataclass
class RecoveryRun:
    """A sequence of CGO pairs and the extrapolated limit.

    Attributes
    ----------
    quantity : str
        ``"Q"`` for a tangential ``Q`` component, ``"q"`` for the scalar
        coefficient, ``"g"`` for the potential transform.
    samples : list of RecoverySample
    estimate, error : complex, float
        Richardson limit and its error bar.
    power : float
        Eliminated leading power.
    c_phase : complex
    low_confidence : bool
        Error bar above ``LOW_CONFIDENCE`` times the estimate magnitude.
    """

    quantity: str
    frame: ZetaFrame
    samples: list
    estimate: complex
    error: float
    power: float
    c_phase: complex
    low_confidence: bool
    oracle: complex | None = None
    notes: dict = field(default_factory=dict)

    @property
    def relative_error(self) -> float | None:
        if self.oracle is None or self.oracle == 0:
            return None
        return abs(self.estimate - self.oracle) / abs(self.oracle)

    def to_json(self) -> dict:
        cx = lambda z: [float(np.real(z)), float(np.imag(z))]  # noqa: E731
        return {
            "quantity": self.quantity,
            "frame": {"xi0": self.frame.xi0.tolist(), "mu1": self.frame.mu1.tolist(),
                      "mu2": self.frame.mu2.tolist()},
            "samples": [
                {"h": s.h, "tau": s.tau, "theta": s.theta, "form_difference": cx(s.form_difference),
                 "scaled": cx(s.scaled), "terms": {k: cx(v) for k, v in s.terms.items()},
                 "residuals": list(s.residuals), "iterations": list(s.iterations)}
                for s in self.samples
            ],
            "estimate": cx(self.estimate),
            "error": self.error,
            "power": self.power,
            "c_phase": cx(self.c_phase),
            "low_confidence": self.low_confidence,
            "oracle": None if self.oracle is None else cx(self.oracle),
            "relative_error": self.relative_error,
            "notes": self.notes,
        }


def _selector(Q1, q1, Q2, q2, frame, theta, n_tau, n_theta, m):
    if theta == "select":
        def pick(h):
            s = select_theta(Q1, q1, Q2, q2, h, frame, n_tau, n_theta, m)
            return s.tau, s.theta
        return pick
    if callable(theta):
        return theta
    th = float(theta)
    return lambda h: (min(h, _tau_limit(frame)), th)


def _run(quantity, Q1, q1, Q2, q2, frame, hs, a1, a2, scale, theta, c_phase, m, n_tau, n_theta,
         force_zero_psi, with_terms, oracle, power, cut=None) -> RecoveryRun:
    if len(hs) < 4:
        raise ValueError("recovery needs at least four h samples for extrapolation")
    spec = Q1.spec
    cut = build_cutoff(spec) if cut is None else cut
    pick = _selector(Q1, q1, Q2, q2, frame, theta, n_tau, n_theta, m)
    samples = []
    for h in hs:
        tau, th = pick(h)
        s1, s2, r1, r2 = cgo_pair(Q1, q1, Q2, q2, frame, tau, th, a1, a2, m, cut, force_zero_psi)
        fd = form_difference(s1, s2, Q1, q1, Q2, q2, frame.xi0)
        val = scale(fd, tau, th)
        terms = nine_terms(s1, s2, Q1, q1, Q2, q2, frame.xi0) if with_terms else {}
        res = () if r1 is None else (r1.residual / r1.rhs_norm if r1.rhs_norm else 0.0,
                                      r2.residual / r2.rhs_norm if r2.rhs_norm else 0.0)
        its = () if r1 is None else (r1.iterations, r2.iterations)
        samples.append(RecoverySample(h, tau, th, fd, val, terms, res, its))
    ext = richardson([s.tau for s in samples], [s.scaled for s in samples], power)
    low = ext.error > LOW_CONFIDENCE * max(abs(ext.value), 1e-300)
    return RecoveryRun(quantity, frame, samples, ext.value, ext.error, ext.power, c_phase, low, oracle)


def transform_at(u: GridFunction, xi0: Sequence[float]) -> complex:
    """``u_hat(xi0)`` read off the lattice."""
    spec = u.spec
    k = np.rint(np.asarray(xi0, dtype=float) * spec.L / (2 * math.pi)).astype(int)
    return complex(u.spectral()[spec.lattice_index(k)])


def recover_Q_component(Q1, q1, Q2, q2, frame: ZetaFrame, hs: Sequence[float], a1="one", a2="one",
                        c_phase: complex = 1.0, theta="select", m: int = 2, n_tau: int = 16,
                        n_theta: int = 16, force_zero_psi: bool = False, with_terms: bool = True,
                        power: float | None = None, cut: Cutoff | None = None) -> RecoveryRun:
    """Estimate ``(mu1 + i mu2).(Q1_hat - Q2_hat)(xi0)`` for ``a1 = a2 = 1``.

    Each sample contributes ``c_phase exp(-i theta) i tau (B_1 - B_2)``;
    the samples are extrapolated to ``tau -> 0``. ``theta`` is ``"select"``
    for the averaged selection, a fixed angle, or a map ``h -> (tau, theta)``.
    """
    c = complex(c_phase)
    scale = lambda fd, tau, th: c * np.exp(-1j * th) * 1j * tau * fd  # noqa: E731
    oracle = None
    dQ = _diff_fields(Q1, Q2)
    if a1 == "one" and a2 == "one":
        if dQ is None:
            oracle = 0j
        else:
            w = frame.mu1 + 1j * frame.mu2
            oracle = sum(w[j] * transform_at(dQ[j], frame.xi0) for j in range(Q1.spec.d))
    return _run("Q", Q1, q1, Q2, q2, frame, hs, a1, a2, scale, theta, c, m, n_tau, n_theta,
                force_zero_psi, with_terms, oracle, power, cut)


def recover_potential_transform(Q1, q1, Q2, q2, frame: ZetaFrame, hs: Sequence[float],
                                c_phase: complex = 1.0, theta=0.0, m: int = 2, n_tau: int = 16,
                                n_theta: int = 16, power: float | None = None,
                                cut: Cutoff | None = None) -> RecoveryRun:
    """Estimate ``g_hat(xi0)`` for a gradient difference ``Q1 - Q2 = Dg``.

    Uses ``a1 = 1`` and ``a2 = phi_a (mu1 - i mu2).x / 2`` so the limit of
    the scaled form difference is ``i g_hat(xi0)``.
    """
    c = complex(c_phase)
    scale = lambda fd, tau, th: -1j * c * np.exp(-1j * th) * 1j * tau * fd  # noqa: E731
    return _run("g", Q1, q1, Q2, q2, frame, hs, "one", "linear", scale, theta, c, m, n_tau, n_theta,
                False, False, None, power, cut)


def recover_q(Q, q1, q2, frame: ZetaFrame, hs: Sequence[float], theta=0.0, m: int = 2, n_tau: int = 16,
              n_theta: int = 16, force_zero_psi: bool = False, with_terms: bool = False,
              power: float | None = None, cut: Cutoff | None = None) -> RecoveryRun:
    """Estimate ``(q1_hat - q2_hat)(xi0)`` with a shared ``Q`` and ``a1 = a2 = 1``.

    The limit is taken of the form difference itself, without the ``h``
    factor.
    """
    scale = lambda fd, tau, th: fd  # noqa: E731
    dq = _diff_fields(q1, q2)
    oracle = 0j if dq is None else transform_at(dq[0], frame.xi0)
    return _run("q", Q, q1, Q, q2, frame, hs, "one", "one", scale, theta, 1.0 + 0j, m, n_tau, n_theta,
                force_zero_psi, with_terms, oracle, power, cut)


def calibration_pair(spec: GridSpec, frame: ZetaFrame, radius: float = 0.8):
    """Known pair with ``Q1 - Q2 = b mu1`` for a smooth bump ``b``."""
    b = smooth_bump(spec, (0.0,) * spec.d, radius)
    pieces = [CoefficientPiece((0,) * spec.d, GridFunction(spec, b * frame.mu1[j], "physical"), 1.0, j)
              for j in range(spec.d) if frame.mu1[j] != 0]
    Q1 = DivergenceFormCoefficient(spec, "vector", pieces)
    zero_Q = DivergenceFormCoefficient.zero(spec, "vector")
    zero_q = DivergenceFormCoefficient.zero(spec, "scalar")
    return Q1, zero_q, zero_Q, zero_q


@dataclass
class PhaseCalibration:
    c_phase: complex
    raw: complex
    oracle: complex
    defect: float

    def to_json(self) -> dict:
        return {"c_phase": [self.c_phase.real, self.c_phase.imag], "raw": [self.raw.real, self.raw.imag],
                "oracle": [self.oracle.real, self.oracle.imag], "defect": self.defect}


def calibrate_phase(spec: GridSpec, xi0: Sequence[float] = (1, 0, 0), hs: Sequence[float] | None = None,
                    m: int = 2) -> PhaseCalibration:
    """Fix the unimodular constant in the ``Q`` estimator from a known pair.

    The raw limit (``c_phase = 1``) is compared with the spectral oracle and
    the ratio is snapped to the nearest of ``{1, -1, i, -i}``; ``defect`` is
    the distance of the unsnapped ratio from it.
    """
    frame = frame_for(xi0)
    hs = hs if hs is not None else [tau_max(frame) * 2.0 ** -k for k in range(1, 6)]
    Q1, q1, Q2, q2 = calibration_pair(spec, frame)
    run = recover_Q_component(Q1, q1, Q2, q2, frame, hs, theta=0.0, m=m, with_terms=False)
    ratio = run.oracle / run.estimate
    best = min(PHASES, key=lambda p: abs(ratio - p))
    return PhaseCalibration(best, run.estimate, run.oracle, float(abs(ratio - best)))


# ---------------------------------------------------------------- curl and potential


def _as_fields(Q) -> list[GridFunction]:
    if isinstance(Q, DivergenceFormCoefficient):
        return Q.components()
    return list(Q)


def curl_test(Q) -> float:
    """``max_{j<k} max_x |d_k Q_j - d_j Q_k|`` with spectral derivatives."""
    fields = _as_fields(Q)
    spec = fields[0].spec
    axes = spec.freq_axes()
    worst = 0.0
    for j in range(spec.d):
        for k in range(j + 1, spec.d):
            c = 1j * axes[k] * fields[j].spectral() - 1j * axes[j] * fields[k].spectral()
            worst = max(worst, float(np.max(np.abs(GridFunction(spec, c, "spectral").physical()))))
    return worst


def _sup(fields: Sequence[GridFunction]) -> float:
    return max(float(np.max(np.abs(f.physical()))) for f in fields)


def potential_from_gradient(Q, curl_tol: float = 1e-8, mean_tol: float = 1e-10) -> GridFunction:
    """Periodic potential ``g`` with ``Dg = Q`` and zero mean.

    Raises
    ------
    ValueError
        If the curl exceeds ``curl_tol`` times ``max |Q|`` or some component
        has a nonzero mean.
    ArithmeticError
        If ``||Dg - Q||`` exceeds ``1e-8 ||Q||``.
    """
    fields = _as_fields(Q)
    spec = fields[0].spec
    sup = _sup(fields)
    if sup == 0:
        return GridFunction(spec, np.zeros(spec.shape, dtype=complex), "spectral")
    curl = curl_test(fields)
    if curl > curl_tol * sup:
        raise ValueError(f"field is not a gradient: curl {curl:.3g} vs max |Q| {sup:.3g}")
    zero = (0,) * spec.d
    scale = max(float(np.sqrt(np.sum(np.abs(f.spectral()) ** 2))) for f in fields)
    for f in fields:
        if abs(f.spectral()[zero]) > mean_tol * scale:
            raise ValueError("a component has nonzero mean")
    k2 = spec.freq_norm2()
    num = sum(ax * f.spectral() for ax, f in zip(spec.freq_axes(), fields))
    safe = np.where(k2 == 0, 1.0, k2)
    g = GridFunction(spec, np.where(k2 == 0, 0.0, num / safe), "spectral")
    err = math.sqrt(sum(float(np.sum(np.abs(ax * g.spectral() - f.spectral()) ** 2))
                        for ax, f in zip(spec.freq_axes(), fields)))
    ref = math.sqrt(sum(float(np.sum(np.abs(f.spectral()) ** 2)) for f in fields))
    if err > 1e-8 * ref:
        raise ArithmeticError(f"gradient reconstruction error {err / ref:.3g}")
    return g


# ---------------------------------------------------------------- reconstruction


def frequency_box(spec: GridSpec, radius: int = 3) -> list[tuple[int, ...]]:
    """Integer wavenumbers with ``|k|_inf <= radius`` in lexicographic order."""
    if radius > spec.N // 8:
        raise ValueError(f"box radius {radius} exceeds band N/8 = {spec.N // 8}")
    return list(itertools.product(range(-radius, radius + 1), repeat=spec.d))


@dataclass
class FrequencyResult:
    k: tuple
    estimate: complex | None
    oracle: complex
    error: float | None
    message: str = ""


@dataclass
class Reconstruction:
    """Estimated field on a frequency set and its error against the band-limited truth."""

    field: GridFunction
    truth: GridFunction
    frequencies: list
    relative_error: float

    @property
    def failed(self) -> list:
        return [r.k for r in self.frequencies if r.estimate is None]


def _frequency_hs(frame: ZetaFrame, hs: Sequence[float]) -> list[float]:
    limit = _tau_limit(frame)
    if hs[0] <= limit:
        return list(hs)
    # keep the dyadic ratios and shift the sweep below the frame's limit
    return [h * limit / hs[0] for h in hs]


def _recover_one(args):
    Q, q1, q2, k, hs, m, force_zero_psi = args
    spec = q1.spec
    xi0 = np.asarray(k, dtype=float) * 2 * math.pi / spec.L
    frame = frame_for(xi0)
    dq = _diff_fields(q1, q2)
    oracle = 0j if dq is None else transform_at(dq[0], xi0)
    try:
        run = recover_q(Q, q1, q2, frame, _frequency_hs(frame, hs), theta=0.0, m=m,
                        force_zero_psi=force_zero_psi)
    except Exception as exc:  # recorded per frequency, see the degradation contract
        return FrequencyResult(tuple(k), None, oracle, None, f"{type(exc).__name__}: {exc}")
    return FrequencyResult(tuple(k), run.estimate, oracle, run.error)


def reconstruct_field(Q, q1, q2, frequencies: Sequence[Sequence[int]], hs: Sequence[float], m: int = 2,
                      jobs: int = 1, force_zero_psi: bool = False,
                      solver: Callable | None = None) -> Reconstruction:
    """Assemble ``q1 - q2`` from single-frequency recoveries.

    Frequencies whose recovery raises are recorded and left at zero. Jobs
    run in a process pool when ``jobs > 1``; results are reduced in the
    order of ``frequencies``.
    """
    spec = q1.spec
    solver = solver or _recover_one
    tasks = [(Q, q1, q2, tuple(int(c) for c in k), list(hs), m, force_zero_psi) for k in frequencies]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solver, tasks))
    else:
        results = [solver(t) for t in tasks]
    est = np.zeros(spec.shape, dtype=complex)
    tru = np.zeros(spec.shape, dtype=complex)
    for r in results:
        idx = spec.lattice_index(r.k)
        tru[idx] = r.oracle
        if r.estimate is not None:
            est[idx] = r.estimate
    field_ = GridFunction(spec, est, "spectral")
    truth = GridFunction(spec, tru, "spectral")
    ref = float(np.sqrt(np.sum(np.abs(tru) ** 2)))
    diff = float(np.sqrt(np.sum(np.abs(est - tru) ** 2)))
    rel = diff / ref if ref > 0 else diff
    return Reconstruction(field_, truth, results, rel)
