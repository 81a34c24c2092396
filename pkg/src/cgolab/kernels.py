"""Kernel dispatch: compiled three-dimensional loops when available, numpy otherwise.

Set ``CGOLAB_PURE_PYTHON=1`` to force the numpy path.
"""

from __future__ import annotations

import math
import os

import numpy as np

from . import _kernels_py

try:
    if os.environ.get("CGOLAB_PURE_PYTHON"):
        raise ImportError("pure python requested")
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def _impl(ndim: int):
    return _compiled if (_compiled is not None and ndim == 3) else _kernels_py


def _axis(spec) -> np.ndarray:
    return np.ascontiguousarray(spec.wavenumbers() * (2.0 * math.pi / spec.L))


def xlambda_sq(spec, coeffs: np.ndarray, zeta: np.ndarray, h: float, lam: float) -> float:
    """Squared X^lambda norm ``L^-d sum |c|^2 (h + |P|)^(2 lam)``."""
    c = np.ascontiguousarray(coeffs, dtype=complex)
    z = np.ascontiguousarray(zeta, dtype=complex)
    total = _impl(c.ndim).weighted_sq_sum(_axis(spec), c, z, float(h), float(lam))
    return total * spec.quad_weight


def divide_symbol(spec, coeffs: np.ndarray, zeta: np.ndarray, h: float, delta: float, power: float):
    """Regularized ``c / P`` (``power=1``) or ``c / |P|^(1/2)`` (``power=0.5``)."""
    c = np.ascontiguousarray(coeffs, dtype=complex)
    z = np.ascontiguousarray(zeta, dtype=complex)
    return _impl(c.ndim).divide_symbol(_axis(spec), c, z, float(h), float(delta), float(power))


def ball_symbol_sum(wavenumbers: np.ndarray, center, radius: float, zeta, h: float, s: float, scale: float) -> float:
    """Lattice sum of ``|xi|^s / |P(h xi)|`` over a ball, lattice ``scale * Z^d``."""
    center = np.ascontiguousarray(center, dtype=float)
    z = np.ascontiguousarray(zeta, dtype=complex)
    k = np.ascontiguousarray(wavenumbers, dtype=float)
    return _impl(center.size).ball_symbol_sum(k, center, float(radius), z, float(h), float(s), float(scale))
