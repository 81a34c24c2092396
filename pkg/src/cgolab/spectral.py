"""Periodic torus grids, Fourier transforms, multipliers and norms.

Functions live on the torus ``[-L/2, L/2)^d`` sampled with ``N`` points per
axis. Spectra are stored in FFT order with the normalization

    forward:  f_hat(xi) = (L/N)^d  sum_x exp(-i x.xi) f(x)
    inverse:  f(x)      = L^(-d)   sum_xi exp(i x.xi) f_hat(xi)

so that ``f_hat`` approximates the continuum transform and the discrete
Parseval identity reads ``sum |f|^2 (L/N)^d = L^(-d) sum |f_hat|^2``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.fft as sfft

__all__ = [
    "GridSpec",
    "GridFunction",
    "make_grid",
    "forward",
    "inverse",
    "apply_multiplier",
    "derivative",
    "sobolev_norm",
    "l2_norm",
    "inner",
    "product",
    "holder_data",
    "mollify_split",
    "save_grid_function",
    "load_grid_function",
    "random_bandlimited",
]


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class GridSpec:
    """Discretization of the periodic box.

    Attributes
    ----------
    d : int
        Spatial dimension.
    N : int
        Points per axis, a power of two and at least 8.
    L : float
        Side length of the box ``[-L/2, L/2)^d``.
    R : float
        Radius of the domain ball centered at the origin.
    """

    d: int
    N: int
    L: float
    R: float
    _cache: dict = field(default_factory=dict, compare=False, repr=False, hash=False)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N**self.d

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def quad_weight(self) -> float:
        """Weight of one lattice frequency in spectral sums, ``L^(-d)``."""
        return self.L ** (-self.d)

    def wavenumbers(self) -> np.ndarray:
        """Integer wavenumbers ``-N/2 .. N/2-1`` in FFT order."""
        return np.fft.fftfreq(self.N, d=1.0 / self.N)

    def freq_axes(self) -> list[np.ndarray]:
        """Broadcastable frequency axes ``2 pi k / L``, one per dimension."""
        if "axes" not in self._cache:
            k = self.wavenumbers() * (2.0 * math.pi / self.L)
            axes = []
            for j in range(self.d):
                sh = [1] * self.d
                sh[j] = self.N
                axes.append(k.reshape(sh))
            self._cache["axes"] = axes
        return self._cache["axes"]

    def coord_axes(self) -> list[np.ndarray]:
        """Broadcastable physical coordinate axes starting at ``-L/2``."""
        if "coords" not in self._cache:
            x = -self.L / 2 + self.dx * np.arange(self.N)
            axes = []
            for j in range(self.d):
                sh = [1] * self.d
                sh[j] = self.N
                axes.append(x.reshape(sh))
            self._cache["coords"] = axes
        return self._cache["coords"]

    def freq_norm2(self) -> np.ndarray:
        """``|xi|^2`` on the full lattice."""
        if "xi2" not in self._cache:
            xi2 = np.zeros(self.shape)
            for a in self.freq_axes():
                xi2 = xi2 + a * a
            self._cache["xi2"] = xi2
        return self._cache["xi2"]

    def radius(self) -> np.ndarray:
        """``|x|`` on the full grid."""
        if "r" not in self._cache:
            r2 = np.zeros(self.shape)
            for a in self.coord_axes():
                r2 = r2 + a * a
            self._cache["r"] = np.sqrt(r2)
        return self._cache["r"]

    def interior_mask(self) -> np.ndarray:
        """Grid points inside the closed domain ball ``|x| <= R``."""
        return self.radius() <= self.R

    def sign(self) -> np.ndarray:
        """The phase ``(-1)^(k_1+...+k_d)`` that accounts for the box offset."""
        if "sign" not in self._cache:
            k = self.wavenumbers().astype(np.int64)
            s1 = np.where(k % 2 == 0, 1.0, -1.0)
            s = np.ones(self.shape)
            for j in range(self.d):
                sh = [1] * self.d
                sh[j] = self.N
                s = s * s1.reshape(sh)
            self._cache["sign"] = s
        return self._cache["sign"]

    def lattice_index(self, k: Sequence[int]) -> tuple[int, ...]:
        """Array index of the integer wavenumber vector ``k``."""
        if len(k) != self.d:
            raise ValueError(f"wavenumber {tuple(k)} has wrong dimension")
        half = self.N // 2
        out = []
        for kj in k:
            kj = int(kj)
            if not -half <= kj < half:
                raise ValueError(f"wavenumber {tuple(k)} outside the lattice")
            out.append(kj % self.N)
        return tuple(out)

    def to_json(self) -> dict:
        return {"d": self.d, "N": self.N, "L": self.L, "R": self.R}


def make_grid(d: int = 3, N: int = 32, L: float = 2 * math.pi, R: float = 0.9) -> GridSpec:
    """Validate parameters and build a :class:`GridSpec`.

    Raises
    ------
    ValueError
        If ``N`` is not a power of two at least 8, ``d < 1`` or the ball
        of radius ``R`` leaves less than ``L/8`` room for a cutoff.
    """
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d}")
    if int(N) != N or N < 8 or not _is_power_of_two(int(N)):
        raise ValueError(f"N must be a power of two >= 8, got {N}")
    if not (L > 0 and math.isfinite(L)):
        raise ValueError(f"box length must be positive, got {L}")
    if not (R > 0 and R < L / 2 - L / 8):
        raise ValueError(f"ball radius {R} does not fit: need 0 < R < {L / 2 - L / 8:.6g}")
    return GridSpec(int(d), int(N), float(L), float(R))


def forward(spec: GridSpec, values: np.ndarray) -> np.ndarray:
    """Physical samples to spectral coefficients."""
    scale = (spec.L / spec.N) ** spec.d
    return sfft.fftn(values, axes=range(-spec.d, 0)) * (spec.sign() * scale)


def inverse(spec: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """Spectral coefficients to physical samples."""
    scale = (spec.N / spec.L) ** spec.d
    return sfft.ifftn(coeffs * (spec.sign() * scale), axes=range(-spec.d, 0))


class GridFunction:
    """Complex field on the lattice holding one representation at a time.

    Parameters
    ----------
    spec : GridSpec
    values : ndarray
        Array of shape ``spec.shape``.
    representation : {"physical", "spectral"}
    """

    __slots__ = ("spec", "_values", "representation")

    def __init__(self, spec: GridSpec, values: np.ndarray, representation: str = "physical"):
        if representation not in ("physical", "spectral"):
            raise ValueError(f"unknown representation {representation!r}")
        values = np.asarray(values, dtype=complex)
        if values.shape != spec.shape:
            raise ValueError(f"shape {values.shape} does not match grid {spec.shape}")
        self.spec = spec
        self._values = values
        self.representation = representation

    @classmethod
    def from_physical(cls, spec: GridSpec, values: np.ndarray) -> "GridFunction":
        return cls(spec, values, "physical")

    @classmethod
    def from_spectral(cls, spec: GridSpec, coeffs: np.ndarray) -> "GridFunction":
        return cls(spec, coeffs, "spectral")

    @property
    def values(self) -> np.ndarray:
        return self._values

    def physical(self) -> np.ndarray:
        if self.representation == "physical":
            return self._values
        return inverse(self.spec, self._values)

    def spectral(self) -> np.ndarray:
        if self.representation == "spectral":
            return self._values
        return forward(self.spec, self._values)

    def as_physical(self) -> "GridFunction":
        return GridFunction(self.spec, self.physical(), "physical")

    def as_spectral(self) -> "GridFunction":
        return GridFunction(self.spec, self.spectral(), "spectral")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.spec, self.spectral() + other.spectral(), "spectral")

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        return GridFunction(self.spec, self.spectral() - other.spectral(), "spectral")

    def __mul__(self, c: complex) -> "GridFunction":
        return GridFunction(self.spec, self._values * c, self.representation)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return f"GridFunction(N={self.spec.N}, d={self.spec.d}, {self.representation})"


def apply_multiplier(u: GridFunction, mult: Callable[..., np.ndarray] | np.ndarray) -> GridFunction:
    """Multiply the spectrum of ``u`` by a symbol.

    ``mult`` is either an array over the lattice or a callable receiving the
    broadcastable frequency axes ``xi_1, ..., xi_d``.

    Raises
    ------
    ValueError
        If the symbol is not finite at some lattice point.
    """
    spec = u.spec
    m = mult(*spec.freq_axes()) if callable(mult) else mult
    m = np.broadcast_to(np.asarray(m), spec.shape)
    if not np.all(np.isfinite(m)):
        raise ValueError("multiplier is not finite on the lattice")
    return GridFunction(spec, u.spectral() * m, "spectral")


def monomial(spec: GridSpec, alpha: Sequence[int]) -> np.ndarray:
    """The symbol ``xi^alpha`` of ``D^alpha`` with ``D = -i grad``."""
    if len(alpha) != spec.d:
        raise ValueError(f"multi-index {tuple(alpha)} has wrong dimension")
    out = np.ones(spec.shape, dtype=complex)
    for a, ax in zip(alpha, spec.freq_axes()):
        if a < 0:
            raise ValueError("multi-index entries must be non-negative")
        if a:
            out = out * ax**a
    return out


def derivative(u: GridFunction, alpha: Sequence[int]) -> GridFunction:
    """``D^alpha u`` computed spectrally."""
    if sum(alpha) == 0:
        return u.as_spectral()
    return GridFunction(u.spec, u.spectral() * monomial(u.spec, alpha), "spectral")


def weighted_norm(spec: GridSpec, coeffs: np.ndarray, weight2: np.ndarray | float = 1.0) -> float:
    """``(L^-d sum weight2 |c|^2)^(1/2)``."""
    a2 = coeffs.real**2 + coeffs.imag**2
    return math.sqrt(float(np.sum(a2 * weight2)) * spec.quad_weight)


def sobolev_norm(u: GridFunction, s: float) -> float:
    """L2-based Sobolev norm with weight ``<xi>^(2s)``."""
    spec = u.spec
    if s == 0:
        return weighted_norm(spec, u.spectral())
    return weighted_norm(spec, u.spectral(), (1.0 + spec.freq_norm2()) ** s)


def l2_norm(u: GridFunction) -> float:
    """Physical quadrature norm ``(sum |u|^2 (L/N)^d)^(1/2)``."""
    v = u.physical()
    return math.sqrt(float(np.sum(v.real**2 + v.imag**2)) * u.spec.dx**u.spec.d)


def inner(u: GridFunction, v: GridFunction) -> complex:
    """Bilinear pairing ``int u v`` (no conjugation) evaluated spectrally.

    Uses ``int u v = L^-d sum_xi u_hat(xi) v_hat(-xi)``.
    """
    spec = u.spec
    vh = v.spectral()
    return complex(np.sum(u.spectral() * reflect(spec, vh))) * spec.quad_weight


def reflect(spec: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    """``c(-xi)`` on the lattice; the Nyquist plane maps to itself."""
    out = coeffs
    for ax in range(-spec.d, 0):
        out = np.roll(np.flip(out, axis=ax), 1, axis=ax)
    return out


def _pad(spec: GridSpec, coeffs: np.ndarray, M: int) -> np.ndarray:
    """Embed an ``N``-lattice spectrum into an ``M``-lattice, zero filled."""
    N = spec.N
    half = N // 2
    out = np.zeros((M,) * spec.d, dtype=complex)
    idx = np.concatenate([np.arange(half), np.arange(M - half, M)])
    out[np.ix_(*([idx] * spec.d))] = coeffs
    return out


def _truncate(spec: GridSpec, coeffs: np.ndarray) -> np.ndarray:
    N = spec.N
    M = coeffs.shape[0]
    half = N // 2
    idx = np.concatenate([np.arange(half), np.arange(M - half, M)])
    return coeffs[np.ix_(*([idx] * spec.d))]


def _padded_spec(spec: GridSpec) -> GridSpec:
    if "padded" not in spec._cache:
        M = 3 * spec.N // 2
        spec._cache["padded"] = GridSpec(spec.d, M, spec.L, spec.R)
    return spec._cache["padded"]


def product(u: GridFunction, v: GridFunction, dealias: bool = True) -> GridFunction:
    """Pointwise product, zero padded to ``3N/2`` per axis when ``dealias``.

    With dealiasing the result equals the exact convolution of the two
    lattice spectra truncated to the lattice.
    """
    spec = u.spec
    if not dealias:
        return GridFunction(spec, u.physical() * v.physical(), "physical")
    big = _padded_spec(spec)
    M = big.N
    up = inverse(big, _pad(spec, u.spectral(), M))
    vp = inverse(big, _pad(spec, v.spectral(), M))
    w = forward(big, up * vp)
    return GridFunction(spec, _truncate(spec, w), "spectral")


def holder_data(f: GridFunction, theta: float) -> tuple[float, float]:
    """Grid estimates of ``sup |f|`` and the Hölder quotient of order ``theta``.

    The quotient is maximized over nearest-neighbour and two-step pairs
    along each axis, excluding pairs that wrap around the torus. Both
    numbers are lower bounds of the continuum quantities.
    """
    if not 0 < theta <= 1:
        raise ValueError("Hölder exponent must lie in (0, 1]")
    v = f.physical()
    sup = float(np.max(np.abs(v)))
    q = 0.0
    for ax in range(f.spec.d):
        n = v.shape[ax]
        for step in (1, 2):
            a = np.take(v, np.arange(step, n), axis=ax)
            b = np.take(v, np.arange(0, n - step), axis=ax)
            diff = float(np.max(np.abs(a - b)))
            q = max(q, diff / (step * f.spec.dx) ** theta)
    return sup, q


@dataclass
class MollifySplit:
    """Result of :func:`mollify_split`.

    Attributes
    ----------
    smooth, rough : GridFunction
        ``f_h`` and ``f^h = f - f_h``.
    smooth_derivative_sup : dict
        ``sup |D^alpha f_h|`` for each multi-index of order one.
    rough_sup : float
        ``sup |f^h|``.
    """

    smooth: GridFunction
    rough: GridFunction
    smooth_derivative_sup: dict
    rough_sup: float


def mollify_split(f: GridFunction, h: float, theta: float | None = None) -> MollifySplit:
    """Split ``f`` into a Gaussian mollification at scale ``h`` and a remainder."""
    if not h > 0:
        raise ValueError(f"mollification scale must be positive, got {h}")
    spec = f.spec
    kernel = np.exp(-0.5 * h * h * spec.freq_norm2())
    fh = GridFunction(spec, f.spectral() * kernel, "spectral")
    rough = f - fh
    ders = {}
    for j in range(spec.d):
        alpha = tuple(1 if i == j else 0 for i in range(spec.d))
        ders[alpha] = float(np.max(np.abs(derivative(fh, alpha).physical())))
    return MollifySplit(fh, rough, ders, float(np.max(np.abs(rough.physical()))))


def save_grid_function(u: GridFunction, path: str | Path) -> tuple[Path, Path]:
    """Write raw little-endian complex64 data plus a JSON sidecar."""
    path = Path(path)
    data = np.ascontiguousarray(u.values, dtype="<c8")
    path.write_bytes(data.tobytes())
    meta = dict(u.spec.to_json(), representation=u.representation)
    side = path.with_name(path.name + ".json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return path, side


def load_grid_function(path: str | Path) -> GridFunction:
    path = Path(path)
    meta = json.loads(path.with_name(path.name + ".json").read_text())
    spec = make_grid(meta["d"], meta["N"], meta["L"], meta["R"])
    data = np.frombuffer(path.read_bytes(), dtype="<c8").reshape(spec.shape)
    return GridFunction(spec, data.astype(complex), meta["representation"])


def random_bandlimited(
    spec: GridSpec, rng: np.random.Generator, band: float | None = None
) -> GridFunction:
    """Complex Gaussian spectrum supported on ``|k| <= band`` (default ``N/4``)."""
    band = spec.N / 4 if band is None else band
    k2 = spec.freq_norm2() * (spec.L / (2 * math.pi)) ** 2
    mask = k2 <= band * band
    c = rng.standard_normal(spec.shape) + 1j * rng.standard_normal(spec.shape)
    return GridFunction(spec, np.where(mask, c, 0.0), "spectral")
