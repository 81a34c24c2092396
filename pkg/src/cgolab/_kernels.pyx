# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled lattice kernels for three-dimensional grids.

Same signatures as ``_kernels_py``; the symbol ``P(h xi)`` is evaluated on
the fly instead of being materialized as a full lattice array.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs, hypot

cnp.import_array()


def weighted_sq_sum(double[::1] xi, double complex[:, :, ::1] coeffs,
                    double complex[::1] zeta, double h, double lam):
    cdef Py_ssize_t n = xi.shape[0], i, j, k
    cdef double zr0 = zeta[0].real, zi0 = zeta[0].imag
    cdef double zr1 = zeta[1].real, zi1 = zeta[1].imag
    cdef double zr2 = zeta[2].real, zi2 = zeta[2].imag
    cdef double x, y, z, re, im, mag, a2, total = 0.0, e = 2.0 * lam
    cdef double complex c
    for i in range(n):
        x = xi[i]
        for j in range(n):
            y = xi[j]
            for k in range(n):
                z = xi[k]
                c = coeffs[i, j, k]
                a2 = c.real * c.real + c.imag * c.imag
                if a2 == 0.0:
                    continue
                # P = h^2|xi|^2 - 2i h zeta.xi
                re = h * h * (x * x + y * y + z * z) + 2.0 * h * (zi0 * x + zi1 * y + zi2 * z)
                im = -2.0 * h * (zr0 * x + zr1 * y + zr2 * z)
                mag = hypot(re, im)
                total += a2 * pow(h + mag, e)
    return total


def divide_symbol(double[::1] xi, double complex[:, :, ::1] coeffs,
                  double complex[::1] zeta, double h, double delta, double power):
    if power != 1.0 and power != 0.5:
        raise ValueError("power must be 1 or 0.5")
    cdef Py_ssize_t n = xi.shape[0], i, j, k
    cdef double zr0 = zeta[0].real, zi0 = zeta[0].imag
    cdef double zr1 = zeta[1].real, zi1 = zeta[1].imag
    cdef double zr2 = zeta[2].real, zi2 = zeta[2].imag
    cdef double x, y, z, re, im, mag, f
    cdef long clamped = 0
    cdef bint half = power == 0.5
    out_arr = np.empty((n, n, n), dtype=np.complex128)
    cdef double complex[:, :, ::1] out = out_arr
    cdef double complex c, p
    for i in range(n):
        x = xi[i]
        for j in range(n):
            y = xi[j]
            for k in range(n):
                z = xi[k]
                re = h * h * (x * x + y * y + z * z) + 2.0 * h * (zi0 * x + zi1 * y + zi2 * z)
                im = -2.0 * h * (zr0 * x + zr1 * y + zr2 * z)
                mag = hypot(re, im)
                if mag < delta:
                    clamped += 1
                    if mag > 0:
                        f = delta / mag
                        re = re * f
                        im = im * f
                    else:
                        re = delta
                        im = 0.0
                    mag = delta
                c = coeffs[i, j, k]
                if half:
                    out[i, j, k] = c / sqrt(mag)
                else:
                    p = re + 1j * im
                    out[i, j, k] = c / p
    return out_arr, clamped


def ball_symbol_sum(double[::1] xi, double[::1] center, double radius,
                    double complex[::1] zeta, double h, double s, double scale):
    cdef Py_ssize_t n = xi.shape[0], i, j, k
    cdef double zr0 = zeta[0].real, zi0 = zeta[0].imag
    cdef double zr1 = zeta[1].real, zi1 = zeta[1].imag
    cdef double zr2 = zeta[2].real, zi2 = zeta[2].imag
    cdef double x, y, z, re, im, mag, xi2, total = 0.0, r2 = radius * radius
    cdef double c0 = center[0], c1 = center[1], c2 = center[2]
    for i in range(n):
        x = xi[i] * scale
        if (x - c0) * (x - c0) >= r2:
            continue
        for j in range(n):
            y = xi[j] * scale
            if (x - c0) * (x - c0) + (y - c1) * (y - c1) >= r2:
                continue
            for k in range(n):
                z = xi[k] * scale
                if (x - c0) * (x - c0) + (y - c1) * (y - c1) + (z - c2) * (z - c2) >= r2:
                    continue
                xi2 = x * x + y * y + z * z
                re = h * h * xi2 + 2.0 * h * (zi0 * x + zi1 * y + zi2 * z)
                im = -2.0 * h * (zr0 * x + zr1 * y + zr2 * z)
                mag = hypot(re, im)
                if mag > 0:
                    total += pow(xi2, 0.5 * s) / mag
    return total
