"""Registry of numerical checks for the weighted-space inequalities.

Every check produces a sweep (dyadic ``h`` or a radius list), measured
values and a reference exponent, and is judged either by the spread of
``value / bound`` across the sweep or by a one-sided log-log slope.
Implied constants are never asserted.
"""

from __future__ import annotations

import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import averaging, kernels
from .fitting import fit_slope, spread
from .frames import XLambdaWeight, Zeta, make_frame, xlambda_norm, zeta_rot
from .multipliers import (
    CoefficientPiece,
    InverseReport,
    apply_Iphi,
    apply_Jphi,
    build_cutoff,
    holder_bump,
    shifted_derivative,
    smooth_bump,
    smooth_multiply,
)
from .spectral import (
    GridFunction,
    derivative,
    inner,
    make_grid,
    product,
    random_bandlimited,
    sobolev_norm,
)

__all__ = ["EstimateConfig", "CheckSpec", "CheckReport", "REGISTRY", "list_checks", "run_check", "run_all"]

SLOPE_SLACK = 0.2
SPREAD_LIMIT = 4.0


@dataclass(frozen=True)
class EstimateConfig:
    """Grid, sweep and sampling parameters shared by the checks."""

    N: int = 64
    L: float = 2 * math.pi
    R: float = 0.9
    xi0: tuple = (1.0, 0.0, 0.0)
    h_exponents: tuple = (3, 4, 5, 6, 7)
    seed: int = 0
    samples: int = 4
    slack: float = SLOPE_SLACK
    spread_limit: float = SPREAD_LIMIT

    @property
    def hs(self) -> list[float]:
        return [2.0**-k for k in self.h_exponents]

    def grid(self):
        return make_grid(3, self.N, self.L, self.R)


@dataclass
class Sweep:
    """Raw output of an evaluator.

    ``values`` are compared with ``x ** exponent`` (mode ``spread``) or
    their fitted exponent is compared with ``exponent`` (mode ``slope``).
    ``direction`` is ``"min"`` when the exponent is a lower bound (``h``
    sweeps, ``h -> 0``) and ``"max"`` for an upper bound (radius sweeps).
    """

    x: list
    values: list
    exponent: float
    extras: dict = field(default_factory=dict)
    direction: str = "min"
    exact_error: float | None = None
    exact_tol: float | None = None


@dataclass(frozen=True)
class CheckSpec:
    """A registered check: evaluator, sweep axis and comparison mode."""

    name: str
    anchor: str
    axis: str
    mode: str
    evaluator: Callable[[EstimateConfig, np.random.Generator], Sweep]


@dataclass
class CheckReport:
    """Outcome of one check; reproducible from ``seed``."""

    name: str
    anchor: str
    mode: str
    axis: str
    seed: int
    x: list
    values: list
    statistic: float
    threshold: float
    passed: bool
    runtime: float
    extras: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        out = asdict(self)
        out["values"] = [float(v) for v in self.values]
        out["x"] = [float(v) for v in self.x]
        return out


# ---------------------------------------------------------------- helpers


def _generic_zeta(cfg: EstimateConfig) -> Zeta:
    fr = make_frame(cfg.xi0)
    return Zeta(fr.mu1 + 1j * fr.mu2)


def _gauss(y2: np.ndarray) -> np.ndarray:
    return np.exp(-0.5 * y2)


def _midpoint_box(center, half: float, step: float):
    n = int(round(2 * half / step))
    ax = -half + step * (np.arange(n) + 0.5)
    grids = np.meshgrid(*[ax + c for c in center], indexing="ij", sparse=True)
    return grids, step**3


def _symbol_abs(grids, zeta: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    x2 = sum(g * g for g in grids)
    zx = sum(z * g for z, g in zip(zeta, grids))
    return x2, np.abs(h * h * x2 - 2j * h * zx)


def _random_unit(spec, rng, w: XLambdaWeight) -> GridFunction:
    u = random_bandlimited(spec, rng)
    return u * (1.0 / xlambda_norm(u, w))


def _holder_field(spec, theta: float = 0.5) -> GridFunction:
    return GridFunction(spec, holder_bump(spec, (0.1, 0.0, 0.0), 0.7, 1.0, theta), "physical")


def _smooth_field(spec) -> GridFunction:
    return GridFunction(spec, smooth_bump(spec, (0.0, 0.0, 0.0), 0.8, 1.0), "physical")


# ---------------------------------------------------------------- evaluators


def _ball_integral(cfg, rng) -> Sweep:
    # h = 1 after rescaling xi -> xi / h; quadrature on a refined lattice
    z = _generic_zeta(cfg).vec
    s, scale = 0.5, 0.25
    radii = [1.0, 2.0, 4.0, 8.0, 16.0]
    vals = []
    for r in radii:
        K = int(math.ceil(r / scale)) + 1
        k = np.arange(-K, K + 1, dtype=float)
        vals.append(kernels.ball_symbol_sum(k, np.zeros(3), r, z, 1.0, s, scale) * scale**3)
    big = fit_slope(radii, vals).slope
    return Sweep(radii, vals, 3 - 1, {"s": s, "stated_exponent": 3 + 1, "fitted": big}, direction="max")


def _weighted_integral(cfg, rng) -> Sweep:
    z = _generic_zeta(cfg).vec
    s = 0.0
    grids, dv = _midpoint_box((0.0, 0.0, 0.0), 8.0, 0.125)
    vals = []
    for h in cfg.hs:
        x2, P = _symbol_abs(grids, z, h)
        vals.append(float(np.sum(_gauss(x2) * x2 ** (s / 2) / P) * dv))
    return Sweep(cfg.hs, vals, -1 - s, {"s": s})


def _symbol_comparison(cfg, rng) -> Sweep:
    z = _generic_zeta(cfg).vec
    vals, per_eta = [], []
    for h in cfg.hs:
        etas = [np.zeros(3)] + [rng.normal(size=3) * rng.uniform(0.5, 2.0) / h for _ in range(cfg.samples)]
        best = 0.0
        for eta in etas:
            grids, dv = _midpoint_box(eta, 8.0, 0.125)
            y2 = sum((g - e) ** 2 for g, e in zip(grids, eta))
            _, P = _symbol_abs(grids, z, h)
            Pe = abs(h * h * float(eta @ eta) - 2j * h * complex(z @ eta))
            best = max(best, float(np.sum(_gauss(y2) / P * np.abs(Pe - P)) * dv))
        vals.append(best)
    return Sweep(cfg.hs, vals, 0.0)


def _supremum(cfg, rng) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    lam, s = 1.0, 1.0
    jb = 1.0 + spec.freq_norm2()
    vals = []
    for h in cfg.hs:
        from .frames import symbol_on_grid

        P = np.abs(symbol_on_grid(spec, z, h))
        vals.append(float(np.max(jb ** (s / 2) / (h + P) ** lam)))
    return Sweep(cfg.hs, vals, -lam - s, {"lam": lam, "s": s})


def _derivative_gain(cfg, rng) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    lam1, lam2, alpha = 0.0, 1.0, (1, 0, 0)
    vals = []
    for h in cfg.hs:
        w2 = XLambdaWeight(h, z, lam2)
        w1 = XLambdaWeight(h, z, lam1)
        r = 0.0
        for _ in range(cfg.samples):
            u = _random_unit(spec, rng, w2)
            r = max(r, xlambda_norm(derivative(u, alpha), w1))
        vals.append(r)
    return Sweep(cfg.hs, vals, -sum(alpha) + lam1 - lam2, {"lam1": lam1, "lam2": lam2, "alpha": alpha})


def _sobolev_embedding(cfg, rng) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    lam = 0.5
    s = 2 * lam
    vals = []
    for h in cfg.hs:
        w = XLambdaWeight(h, z, lam)
        vals.append(max(sobolev_norm(_random_unit(spec, rng, w), s) for _ in range(cfg.samples)))
    return Sweep(cfg.hs, vals, -s - lam, {"lam": lam, "s": s})


def _dual_embedding(cfg, rng) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    lam, s = 0.5, 1.0
    vals = []
    for h in cfg.hs:
        w = XLambdaWeight(h, z, -lam)
        r = 0.0
        for _ in range(cfg.samples):
            u = random_bandlimited(spec, rng)
            r = max(r, xlambda_norm(u, w) / sobolev_norm(u, -s))
        vals.append(r)
    return Sweep(cfg.hs, vals, -s - lam, {"lam": lam, "s": s})


def _pairing_sweep(cfg, rng, f: GridFunction, alpha, beta, lam, shifted: bool) -> list[float]:
    spec = f.spec
    fr = make_frame(cfg.xi0)
    Df = derivative(f, alpha)
    vals = []
    for h in cfg.hs:
        z1 = zeta_rot(fr, 1, h, 0.0)
        z2 = zeta_rot(fr, 2, h, 0.0)
        w1, w2 = XLambdaWeight(h, z1, lam), XLambdaWeight(h, z2, lam)
        best = 0.0
        for _ in range(cfg.samples):
            u = _random_unit(spec, rng, w1)
            Du = shifted_derivative(u, h, z1, beta) if shifted else derivative(u, beta)
            if shifted:
                # dual norm of T u in X^{-lam} for the second frame
                best = max(best, xlambda_norm(product(Df, Du), XLambdaWeight(h, z2, -lam)))
            else:
                v = _random_unit(spec, rng, w2)
                best = max(best, abs(inner(product(Df, Du), v)))
        vals.append(best)
    return vals


def _trilinear(cfg, rng) -> Sweep:
    spec = cfg.grid()
    f = _smooth_field(spec)
    alpha, beta, lam = (1, 0, 0), (0, 1, 0), 1.0
    vals = _pairing_sweep(cfg, rng, f, alpha, beta, lam, shifted=False)
    return Sweep(cfg.hs, vals, -2 * lam - sum(alpha) - sum(beta), {"alpha": alpha, "beta": beta, "lam": lam})


def _holder_gain(cfg, rng) -> Sweep:
    spec = cfg.grid()
    theta = 0.5
    f = _holder_field(spec, theta)
    alpha, beta, lam = (1, 0, 0), (0, 1, 0), 1.0
    vals = _pairing_sweep(cfg, rng, f, alpha, beta, lam, shifted=True)
    return Sweep(cfg.hs, vals, -2 * lam - sum(alpha) - sum(beta) + theta,
                 {"alpha": alpha, "beta": beta, "lam": lam, "theta": theta})


def _smooth_mult(cfg, rng) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    lam = 1.0
    xi0 = np.asarray(cfg.xi0)
    phase = np.ones(spec.shape, dtype=complex)
    for c, ax in zip(xi0, spec.coord_axes()):
        phase = phase * np.exp(-1j * c * ax)
    v = GridFunction(spec, phase, "physical")
    vals = []
    for h in cfg.hs:
        w = XLambdaWeight(h, z, lam)
        vals.append(max(smooth_multiply(v, random_bandlimited(spec, rng), w).ratio for _ in range(cfg.samples)))
    return Sweep(cfg.hs, vals, 0.0, {"lam": lam})


NORM_LAMBDAS = (-1.0, -0.5, 0.0, 0.5, 1.0)


def operator_norm_estimate(op, spec, h, zeta, lam_in, lam_out, rng, samples) -> float:
    """Largest ``||op u||_{X^lam_out} / ||u||_{X^lam_in}`` over random bandlimited ``u``.

    Test inputs vanish on lattice modes where the symbol is clamped
    (``|P| < 1e-8 h``); there the regularized division reflects the floor,
    not the operator.
    """
    from .frames import symbol_on_grid
    from .multipliers import DELTA_FACTOR

    w_in, w_out = XLambdaWeight(h, zeta, lam_in), XLambdaWeight(h, zeta, lam_out)
    keep = np.abs(symbol_on_grid(spec, zeta, h)) >= DELTA_FACTOR * h
    best = 0.0
    for _ in range(samples):
        u = random_bandlimited(spec, rng)
        u = GridFunction(spec, np.where(keep, u.spectral(), 0.0), "spectral")
        best = max(best, xlambda_norm(op(u), w_out) / xlambda_norm(u, w_in))
    return best


def _op_norm_sweep(cfg, rng, which: str) -> Sweep:
    spec = cfg.grid()
    z = _generic_zeta(cfg)
    cut = build_cutoff(spec)
    gain = 0.5 if which == "J" else 1.0
    per_lam = {}
    for lam in NORM_LAMBDAS:
        row = []
        for h in cfg.hs:
            if which == "J":
                op = lambda u, h=h: apply_Jphi(u, h, z, cut)  # noqa: E731
            else:
                op = lambda u, h=h: apply_Iphi(u, h, z, cut, report=InverseReport())  # noqa: E731
            row.append(operator_norm_estimate(op, spec, h, z, lam, lam + gain, rng, cfg.samples))
        per_lam[lam] = row
    spreads = {str(k): spread(v) for k, v in per_lam.items()}
    worst = max(per_lam, key=lambda k: spreads[str(k)])
    return Sweep(cfg.hs, per_lam[worst], 0.0, {"per_lambda": {str(k): v for k, v in per_lam.items()},
                                              "spreads": spreads, "worst_lambda": worst})


def _jphi(cfg, rng) -> Sweep:
    return _op_norm_sweep(cfg, rng, "J")


def _iphi(cfg, rng) -> Sweep:
    return _op_norm_sweep(cfg, rng, "I")


def _measure_samples(fr, h, rng, count):
    x0 = float(np.linalg.norm(fr.xi0))
    big = max(16 * x0, 1.0)
    out = {"small": [], "large-thin": [], "large-flat": []}
    e0 = fr.xi0 / x0
    while any(len(v) < count for v in out.values()):
        kind = rng.integers(3)
        if kind == 0:
            xi = rng.normal(size=3)
            xi *= rng.uniform(0.1, big) / np.linalg.norm(xi)
        elif kind == 1:
            r = rng.uniform(big * 1.05, min(16 / h, 4 * big))
            ang = rng.uniform(0, 2 * np.pi)
            xi = r * (np.cos(ang) * fr.mu1 + np.sin(ang) * fr.mu2) + rng.normal() * e0
        else:
            r = rng.uniform(max(big * 1.05, 20 / h), 40 / h)
            xi = r * e0 + rng.uniform(0.01, 0.5) * (fr.mu1 * rng.normal() + fr.mu2 * rng.normal())
        reg = averaging.measure_regime(fr, xi, h)
        if len(out[reg]) < count:
            out[reg].append(xi)
    return out


def _averaged_symbol(cfg, rng) -> Sweep:
    fr = make_frame(cfg.xi0)
    eps = 0.25
    hs = [h for h in cfg.hs if h <= 1 / (4 * np.linalg.norm(fr.xi0))]
    vals, regimes = [], {}
    for h in hs:
        samples = _measure_samples(fr, h, rng, cfg.samples)
        worst = 0.0
        for reg, xs in samples.items():
            r = max(averaging.measure_integral(fr, xi, h, eps) * (h * (1 + float(xi @ xi)) ** 0.5) ** (4 - 4 * eps)
                    for xi in xs)
            regimes.setdefault(reg, []).append(r)
            worst = max(worst, r)
        vals.append(worst)
    return Sweep(hs, vals, 0.0, {"eps": eps, "per_regime": regimes})


def _averaged_norm(cfg, rng) -> Sweep:
    spec = make_grid(3, min(cfg.N, 32), cfg.L, cfg.R)
    fr = make_frame(cfg.xi0)
    m, eps = 2, 0.25
    s = m / 2 + 1 - 1.5 * eps
    f = derivative(_holder_field(spec), (1, 1, 0))
    rep = averaging.average_slope_test(f, m / 2, s, eps, fr, cfg.hs, 16, 16)
    return Sweep(rep.hs, rep.averaged, rep.bound,
                 {"worst_fixed_slope": rep.worst_fixed_slope, "beats_worst_fixed": rep.beats_worst_fixed})


def _jacobian(cfg, rng) -> Sweep:
    fr = make_frame(cfg.xi0)
    tmax = min(1.0, 1 / (2 * np.linalg.norm(fr.xi0)))
    worst_rel, worst_bound = 0.0, 0.0
    n = 1000
    for _ in range(n):
        xi = rng.normal(size=3) * rng.uniform(0.1, 10)
        tau = rng.uniform(0.02, 1.0) * tmax
        th = rng.uniform(0, 2 * np.pi)
        J = averaging.jacobian(fr, xi, tau, th)
        Jfd = averaging.jacobian_fd(fr, xi, tau, th, k=int(rng.integers(1, 3)))
        worst_rel = max(worst_rel, abs(J - Jfd) / J)
        lb = averaging.jacobian_lower_bound(fr, xi, tau)
        worst_bound = max(worst_bound, (lb - J) / max(J, 1e-300))
    err = max(worst_rel, 0.0 if worst_bound <= 1e-12 else 1.0)
    return Sweep([n], [worst_rel], 0.0, {"bound_violation": worst_bound}, exact_error=err, exact_tol=1e-6)


def _spec(name, anchor, axis, mode, fn):
    return CheckSpec(name, anchor, axis, mode, fn)


REGISTRY: dict[str, CheckSpec] = {c.name: c for c in [
    _spec("ball_integral", "ball integral of |xi|^s/|P(h xi)| grows like r^(d-1) at h = 1", "radius", "slope", _ball_integral),
    _spec("weighted_integral", "Schwartz-weighted integral of 1/|P(h xi)| scales as h^(-1)", "h", "spread", _weighted_integral),
    _spec("symbol_comparison",
          "integral of |phi(xi-eta)| ||P(h eta)|-|P(h xi)||/|P(h xi)| stays bounded", "h", "slope", _symbol_comparison),
    _spec("weight_supremum", "sup <xi>^s/(h+|P|)^lam <= h^(-lam-s)", "h", "slope", _supremum),
    _spec("derivative_gain", "D^alpha maps X^lam2 to X^lam1 with norm h^(-|alpha|+lam1-lam2)", "h", "slope", _derivative_gain),
    _spec("sobolev_embedding", "W^{s,2} norm <= h^(-s-lam) X^lam norm", "h", "slope", _sobolev_embedding),
    _spec("dual_embedding", "X^-lam norm <= h^(-s-lam) W^{-s,2} norm", "h", "slope", _dual_embedding),
    _spec("trilinear", "|<D^a f D^b u, v>| <= h^(-2lam-|a|-|b|) |f|_inf", "h", "slope", _trilinear),
    _spec("holder_gain", "C^theta pieces gain h^theta when |alpha| >= 1", "h", "slope", _holder_gain),
    _spec("smooth_mult", "|uv|_{X^lam} <= C |u|_{X^lam} for smooth v", "h", "spread", _smooth_mult),
    _spec("jphi_norm", "J_phi bounded X^lam -> X^(lam+1/2) uniformly in h", "h", "spread", _jphi),
    _spec("iphi_norm", "I_phi bounded X^lam -> X^(lam+1) uniformly in h", "h", "spread", _iphi),
    _spec("averaged_symbol", "averaged (tau+|P|)^(2eps-2) <= 1/(tau<xi>)^(4-4eps)", "h", "slope", _averaged_symbol),
    _spec("averaged_norm", "averaged X^-lam norm <= h^(-2(s+lam-1+eps)) W^{-s,2} norm", "h", "slope", _averaged_norm),
    _spec("jacobian", "2|xi_perp|^2/tau^3 <= J and closed-form determinant", "samples", "exact", _jacobian),
]}


def list_checks() -> dict[str, str]:
    """Registered check names with their anchors."""
    return {name: c.anchor for name, c in REGISTRY.items()}


def _judge(spec: CheckSpec, sw: Sweep, cfg: EstimateConfig) -> tuple[float, float, bool]:
    if spec.mode == "exact":
        return float(sw.exact_error), float(sw.exact_tol), bool(sw.exact_error <= sw.exact_tol)
    if spec.mode == "spread":
        ratios = [v / x**sw.exponent for x, v in zip(sw.x, sw.values)]
        sp = spread(ratios)
        return sp, cfg.spread_limit, bool(sp <= cfg.spread_limit)
    fitted = fit_slope(sw.x, sw.values).slope
    if sw.direction == "min":
        thr = sw.exponent - cfg.slack
        return fitted, thr, bool(fitted >= thr)
    thr = sw.exponent + cfg.slack
    return fitted, thr, bool(fitted <= thr)


def run_check(name: str, config: EstimateConfig | None = None) -> CheckReport:
    """Evaluate one registered check.

    Raises
    ------
    KeyError
        If ``name`` is not registered.
    """
    if name not in REGISTRY:
        raise KeyError(f"unknown check {name!r}; known: {', '.join(REGISTRY)}")
    cfg = config or EstimateConfig()
    spec = REGISTRY[name]
    rng = np.random.default_rng([cfg.seed, list(REGISTRY).index(name)])
    t0 = time.perf_counter()
    sw = spec.evaluator(cfg, rng)
    stat, thr, ok = _judge(spec, sw, cfg)
    extras = dict(sw.extras)
    extras["reference_exponent"] = sw.exponent
    extras["direction"] = sw.direction
    return CheckReport(name, spec.anchor, spec.mode, spec.axis, cfg.seed, list(sw.x), list(sw.values),
                       float(stat), float(thr), ok, time.perf_counter() - t0, extras)


def run_all(config: EstimateConfig | None = None, names=None) -> list[CheckReport]:
    return [run_check(n, config) for n in (names or list(REGISTRY))]
