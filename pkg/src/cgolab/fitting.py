"""Log-log slope fits, spread tests and Richardson extrapolation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class SlopeFit:
    """Least-squares line through ``(log2 x, log2 y)``.

    Attributes
    ----------
    slope, intercept : float
    residual : float
        Root-mean-square residual of the fit in log2 units.
    n : int
    """

    slope: float
    intercept: float
    residual: float
    n: int


def fit_slope(x: Sequence[float], y: Sequence[float]) -> SlopeFit:
    """Fit ``log2 y = slope * log2 x + intercept``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        raise ValueError("need at least two points for a slope")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("log-log fit needs positive data")
    lx, ly = np.log2(x), np.log2(y)
    A = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(A, ly, rcond=None)
    res = ly - A @ coef
    return SlopeFit(float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(res**2))), int(x.size))


def spread(values: Sequence[float]) -> float:
    """``max / min`` of positive values."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("inf")
    return float(v.max() / v.min())


@dataclass(frozen=True)
class Extrapolation:
    """Richardson limit of a sequence sampled at decreasing ``h``.

    Attributes
    ----------
    value : complex
        Extrapolated ``h -> 0`` limit.
    error : float
        Error bar from the residuals and the last two extrapolation levels.
    power : float
        Leading power of ``h`` that was eliminated.
    """

    value: complex
    error: float
    power: float


def richardson(hs: Sequence[float], values: Sequence[complex], power: float | None = None) -> Extrapolation:
    """Eliminate the leading power ``h^p`` from ``values(h) = V + c h^p + ...``.

    ``p`` is fitted from successive differences when not given. The model
    ``V + c1 h^p + c2 h^{2p}`` is fitted by least squares; the error bar
    combines the fit residual with the change against the one-term model.
    """
    h = np.asarray(hs, dtype=float)
    v = np.asarray(values, dtype=complex)
    if h.size < 4:
        raise ValueError("extrapolation needs at least four samples")
    order = np.argsort(-h)
    h, v = h[order], v[order]
    if power is None:
        dif = np.abs(np.diff(v))
        good = dif > 0
        if np.count_nonzero(good) >= 2:
            mids = np.sqrt(h[:-1] * h[1:])[good]
            p = fit_slope(mids, dif[good]).slope
            power = float(np.clip(p, 0.25, 3.0))
        else:
            power = 1.0
    cols1 = np.vstack([np.ones_like(h), h**power]).T
    cols2 = np.vstack([np.ones_like(h), h**power, h ** (2 * power)]).T
    c1, *_ = np.linalg.lstsq(cols1.astype(complex), v, rcond=None)
    c2, *_ = np.linalg.lstsq(cols2.astype(complex), v, rcond=None)
    r2 = v - cols2 @ c2
    dof = max(h.size - 3, 1)
    resid = float(np.sqrt(np.sum(np.abs(r2) ** 2) / dof))
    err = float(np.hypot(resid, abs(c2[0] - c1[0])))
    return Extrapolation(complex(c2[0]), err, float(power))
