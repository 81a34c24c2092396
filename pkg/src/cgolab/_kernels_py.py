"""Pure numpy versions of the lattice kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature. Arguments are the one-dimensional frequency axis ``xi`` (shared
by all dimensions), lattice spectra in FFT order and the symbol data
``(zeta, h)``.
"""

from __future__ import annotations

import numpy as np


def _symbol(xi: np.ndarray, d: int, zeta: np.ndarray, h: float) -> np.ndarray:
    out = np.zeros((xi.size,) * d, dtype=complex)
    for j in range(d):
        sh = [1] * d
        sh[j] = xi.size
        ax = xi.reshape(sh)
        out = out + (h * h) * ax * ax - (2j * h * zeta[j]) * ax
    return out


def weighted_sq_sum(xi, coeffs, zeta, h, lam):
    """``sum |c|^2 (h + |P(h xi)|)^(2 lam)``."""
    a2 = coeffs.real**2 + coeffs.imag**2
    w = (h + np.abs(_symbol(xi, coeffs.ndim, zeta, h))) ** (2.0 * lam)
    return float(np.sum(a2 * w))


def divide_symbol(xi, coeffs, zeta, h, delta, power):
    """``c / P_reg^power`` where ``P_reg`` lifts ``|P| < delta`` to ``delta``.

    ``power = 1`` divides by the complex symbol; ``power = 0.5`` divides by
    ``|P_reg|^(1/2)``. Returns the new array and the number of clamped modes.
    """
    P = _symbol(xi, coeffs.ndim, zeta, h)
    mag = np.abs(P)
    small = mag < delta
    if np.any(small):
        safe = np.where(mag > 0, mag, 1.0)
        phase = np.where(mag > 0, P / safe, 1.0)
        P = np.where(small, delta * phase, P)
        mag = np.where(small, delta, mag)
    if power == 1:
        out = coeffs / P
    elif power == 0.5:
        out = coeffs / np.sqrt(mag)
    else:
        raise ValueError("power must be 1 or 0.5")
    return out, int(np.count_nonzero(small))


def ball_symbol_sum(xi, center, radius, zeta, h, s, scale):
    """``sum |xi|^s / |P(h xi)|`` over lattice points with ``|xi - center| < radius``.

    Lattice points where ``P`` vanishes are skipped. ``scale`` multiplies
    the lattice (``2 pi / L``) and ``xi`` holds integer wavenumbers.
    """
    d = center.size
    k = [xi.reshape([-1 if i == j else 1 for i in range(d)]) * scale for j in range(d)]
    dist2 = sum((kj - cj) ** 2 for kj, cj in zip(k, center))
    mask = dist2 < radius * radius
    xi2 = sum(kj * kj for kj in k)
    P = h * h * xi2 - 2j * h * sum(z * kj for z, kj in zip(zeta, k))
    mag = np.abs(P)
    good = mask & (mag > 0)
    return float(np.sum(np.where(good, xi2 ** (s / 2) / np.where(good, mag, 1.0), 0.0)))
