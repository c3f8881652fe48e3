"""Periodic grids, spectral fields and Fourier-multiplier operators.

Fields live on the torus [0, L)^2 sampled at n x n collocation points.
Coefficients are stored in FFT order and normalised so that

    f(x) = sum_k coeffs[k] * exp(i k.x)

i.e. ``coeffs = fft2(values) / n**2``.  With this convention Parseval reads
``||f||_{L^2}^2 = L^2 * sum_k |coeffs[k]|^2``.

Arrays are indexed ``[i1, i2]`` with ``i1`` running along x1 (the first
coordinate), so ``sin(x1)`` varies along axis 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "SpectralField",
    "VectorField",
    "FractionalOrder",
    "as_order",
    "fractional_laplacian",
    "semigroup_apply",
    "biot_savart",
    "gradient",
    "divergence",
    "perp_gradient",
    "curl",
    "laplacian",
    "lp_norm",
    "dealias",
    "leray_project",
    "product",
    "fft2",
    "ifft2",
]

HERMITIAN_RTOL = 1e-12
DIVERGENCE_RTOL = 1e-10


def fft2(values: np.ndarray) -> np.ndarray:
    """Normalised forward transform (physical -> coefficients)."""
    n = values.shape[0]
    return sfft.fft2(values) / (n * n)


def ifft2(coeffs: np.ndarray, real: bool = True) -> np.ndarray:
    """Inverse of :func:`fft2`; returns the real part when ``real``."""
    n = coeffs.shape[0]
    out = sfft.ifft2(coeffs) * (n * n)
    return out.real if real else out


def _mirror(a: np.ndarray) -> np.ndarray:
    """Return ``b`` with ``b[k] = a[-k]`` on the FFT index lattice."""
    return np.roll(np.flip(a, axis=(0, 1)), 1, axis=(0, 1))


@dataclass(frozen=True)
class Grid:
    """Square periodic collocation grid.

    ``n`` must be a power of two with ``n >= 16``.  Wavenumbers are the
    integer lattice ``{-n/2, ..., n/2-1}^2`` scaled by ``2*pi/box_length``.
    """

    n: int
    box_length: float = 2 * math.pi

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or isinstance(n, bool):
            raise TypeError(f"grid size must be an integer, got {n!r}")
        if n < 16 or n & (n - 1):
            raise ValueError(f"grid size must be a power of two >= 16, got {n}")
        if not self.box_length > 0:
            raise ValueError(f"box_length must be positive, got {self.box_length}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "box_length", float(self.box_length))

    @property
    def dx(self) -> float:
        return self.box_length / self.n

    @property
    def scale(self) -> float:
        return 2 * math.pi / self.box_length

    @cached_property
    def index1d(self) -> np.ndarray:
        return np.fft.fftfreq(self.n, 1.0 / self.n)

    @cached_property
    def int_k1(self) -> np.ndarray:
        return np.broadcast_to(self.index1d[:, None], (self.n, self.n))

    @cached_property
    def int_k2(self) -> np.ndarray:
        return np.broadcast_to(self.index1d[None, :], (self.n, self.n))

    @cached_property
    def k1(self) -> np.ndarray:
        return self.int_k1 * self.scale

    @cached_property
    def k2(self) -> np.ndarray:
        return self.int_k2 * self.scale

    @cached_property
    def kmag(self) -> np.ndarray:
        """|k| in box-scaled units; zero only at the zero mode."""
        return np.hypot(self.k1, self.k2)

    @cached_property
    def kmag2(self) -> np.ndarray:
        return self.k1**2 + self.k2**2

    @cached_property
    def inv_kmag2(self) -> np.ndarray:
        out = np.zeros_like(self.kmag2)
        nz = self.kmag2 > 0
        out[nz] = 1.0 / self.kmag2[nz]
        return out

    @cached_property
    def _nyquist(self) -> np.ndarray:
        return self.index1d == -(self.n // 2)

    @cached_property
    def dk1(self) -> np.ndarray:
        """Wavenumber used for odd derivatives along x1 (Nyquist row zeroed)."""
        k = self.index1d * self.scale
        k = np.where(self._nyquist, 0.0, k)
        return np.broadcast_to(k[:, None], (self.n, self.n))

    @cached_property
    def dk2(self) -> np.ndarray:
        k = self.index1d * self.scale
        k = np.where(self._nyquist, 0.0, k)
        return np.broadcast_to(k[None, :], (self.n, self.n))

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """2/3 rule: keep modes with max(|k1|, |k2|) <= n/3 (integer units)."""
        cut = self.n / 3.0
        return (np.abs(self.int_k1) <= cut) & (np.abs(self.int_k2) <= cut)

    @property
    def retained_radius(self) -> float:
        """Largest |k| (box units) guaranteed untouched by dealiasing."""
        return math.floor(self.n / 3.0) * self.scale

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        x = np.arange(self.n) * self.dx
        return np.meshgrid(x, x, indexing="ij")

    @property
    def cell_area(self) -> float:
        return self.dx * self.dx


@dataclass(frozen=True)
class FractionalOrder:
    """Order of the fractional Laplacian, restricted to (0, 2]."""

    alpha: float

    def __post_init__(self):
        a = float(self.alpha)
        if not (0.0 < a <= 2.0) or math.isnan(a):
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        object.__setattr__(self, "alpha", a)

    def __float__(self):
        return self.alpha


def as_order(alpha: Union[float, FractionalOrder]) -> FractionalOrder:
    return alpha if isinstance(alpha, FractionalOrder) else FractionalOrder(alpha)


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Scalar field on a :class:`Grid`, stored by its Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray
    real_flag: bool = True

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=np.complex128)
        if c.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"coefficient shape {c.shape} does not match grid ({self.grid.n}, {self.grid.n})"
            )
        if c is self.coeffs:
            c = c.view()
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)
        if self.real_flag:
            err = self.hermitian_defect()
            if err > HERMITIAN_RTOL:
                raise ValueError(f"coefficients are not Hermitian (relative defect {err:.3e})")

    # construction -------------------------------------------------------
    @classmethod
    def from_physical(cls, grid: Grid, values: np.ndarray) -> "SpectralField":
        values = np.asarray(values)
        real = not np.iscomplexobj(values)
        return cls(grid, fft2(values), real_flag=real)

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        x1, x2 = grid.coords
        return cls.from_physical(grid, np.broadcast_to(fn(x1, x2), (grid.n, grid.n)))

    @classmethod
    def zeros(cls, grid: Grid) -> "SpectralField":
        return cls(grid, np.zeros((grid.n, grid.n), dtype=np.complex128))

    @classmethod
    def constant(cls, grid: Grid, value: float) -> "SpectralField":
        c = np.zeros((grid.n, grid.n), dtype=np.complex128)
        c[0, 0] = value
        return cls(grid, c)

    @classmethod
    def single_mode(cls, grid: Grid, k1: int, k2: int, amplitude: float = 1.0, kind: str = "cos"):
        """Real field ``amplitude * cos(k.x)`` (or ``sin``) for integer lattice k."""
        x1, x2 = grid.coords
        phase = grid.scale * (k1 * x1 + k2 * x2)
        fn = np.cos if kind == "cos" else np.sin
        return cls.from_physical(grid, amplitude * fn(phase))

    # views -----------------------------------------------------------------
    def physical(self) -> np.ndarray:
        return ifft2(np.asarray(self.coeffs), real=self.real_flag)

    def hermitian_defect(self) -> float:
        c = self.coeffs
        scale = np.max(np.abs(c))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(_mirror(c) - np.conj(c))) / scale)

    @property
    def mean(self) -> complex:
        z = self.coeffs[0, 0]
        return float(z.real) if self.real_flag else complex(z)

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralField":
        return SpectralField(self.grid, coeffs, self.real_flag)

    def copy(self) -> "SpectralField":
        return self.with_coeffs(np.array(self.coeffs))

    # arithmetic ------------------------------------------------------------
    def _check(self, other: "SpectralField"):
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")

    def __add__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs + other.coeffs,
                                 self.real_flag and other.real_flag)
        return NotImplemented

    def __sub__(self, other):
        if isinstance(other, SpectralField):
            self._check(other)
            return SpectralField(self.grid, self.coeffs - other.coeffs,
                                 self.real_flag and other.real_flag)
        return NotImplemented

    def __mul__(self, c):
        if np.isscalar(c):
            real = self.real_flag and np.isrealobj(c)
            return SpectralField(self.grid, self.coeffs * c, real)
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return SpectralField(self.grid, -self.coeffs, self.real_flag)

    def __repr__(self):
        return f"SpectralField(n={self.grid.n}, real={self.real_flag})"


@dataclass(frozen=True, eq=False)
class VectorField:
    """Planar vector field (u1, u2); ``divergence_free`` is checked when set."""

    u1: SpectralField
    u2: SpectralField
    divergence_free: bool = False

    def __post_init__(self):
        if self.u1.grid != self.u2.grid:
            raise ValueError("vector components live on different grids")
        if self.divergence_free:
            defect = self.divergence_defect()
            if defect > DIVERGENCE_RTOL:
                raise ValueError(f"vector field is not divergence free (defect {defect:.3e})")

    @property
    def grid(self) -> Grid:
        return self.u1.grid

    def divergence_defect(self) -> float:
        g = self.grid
        div = g.dk1 * self.u1.coeffs + g.dk2 * self.u2.coeffs
        scale = max(np.max(np.abs(self.u1.coeffs)), np.max(np.abs(self.u2.coeffs)))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(div)) / scale)

    def physical(self) -> tuple[np.ndarray, np.ndarray]:
        return self.u1.physical(), self.u2.physical()

    def magnitude(self) -> np.ndarray:
        a, b = self.physical()
        return np.hypot(a, b)

    def __add__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VectorField") -> "VectorField":
        return VectorField(self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c) -> "VectorField":
        return VectorField(self.u1 * c, self.u2 * c, self.divergence_free)

    __rmul__ = __mul__

    @classmethod
    def constant(cls, grid: Grid, c1: float, c2: float) -> "VectorField":
        return cls(SpectralField.constant(grid, c1), SpectralField.constant(grid, c2), True)

    @classmethod
    def from_physical(cls, grid: Grid, v1: np.ndarray, v2: np.ndarray,
                      divergence_free: bool = False) -> "VectorField":
        return cls(SpectralField.from_physical(grid, v1),
                   SpectralField.from_physical(grid, v2), divergence_free)


# ---------------------------------------------------------------------------
# multipliers

def fractional_laplacian(f: SpectralField, alpha) -> SpectralField:
    """|D|^alpha f, i.e. multiply each coefficient by |k|^alpha."""
    a = as_order(alpha).alpha
    return f.with_coeffs(f.grid.kmag**a * f.coeffs)


def semigroup_apply(f: SpectralField, alpha, t: float) -> SpectralField:
    """exp(-t |D|^alpha) f; the identity at t = 0."""
    a = as_order(alpha).alpha
    if t < 0:
        raise ValueError(f"semigroup time must be non-negative, got {t}")
    if t == 0:
        return f.copy()
    return f.with_coeffs(np.exp(-t * f.grid.kmag**a) * f.coeffs)


def gradient(f: SpectralField) -> VectorField:
    g = f.grid
    c = f.coeffs
    return VectorField(f.with_coeffs(1j * g.dk1 * c), f.with_coeffs(1j * g.dk2 * c))


def perp_gradient(f: SpectralField) -> VectorField:
    """(-d2 f, d1 f); always divergence free."""
    g = f.grid
    c = f.coeffs
    return VectorField(f.with_coeffs(-1j * g.dk2 * c), f.with_coeffs(1j * g.dk1 * c), True)


def divergence(v: VectorField) -> SpectralField:
    g = v.grid
    return v.u1.with_coeffs(1j * g.dk1 * v.u1.coeffs + 1j * g.dk2 * v.u2.coeffs)


def curl(v: VectorField) -> SpectralField:
    """Scalar vorticity d1 v2 - d2 v1."""
    g = v.grid
    return v.u1.with_coeffs(1j * g.dk1 * v.u2.coeffs - 1j * g.dk2 * v.u1.coeffs)


def laplacian(f: SpectralField) -> SpectralField:
    return f.with_coeffs(-f.grid.kmag2 * f.coeffs)


def biot_savart(omega: SpectralField, mean_tol: float = 1e-10) -> VectorField:
    """Recover the zero-mean divergence-free velocity whose curl is ``omega``.

    Uses the stream function psi = Delta^{-1} omega and v = (-d2 psi, d1 psi).
    A vorticity whose mean exceeds ``mean_tol`` (relative to its largest
    coefficient) has no periodic stream function and is rejected; a smaller
    mean is projected out.
    """
    if not omega.real_flag:
        raise ValueError("vorticity must be a real field")
    c = np.array(omega.coeffs)
    scale = np.max(np.abs(c))
    if abs(c[0, 0]) > mean_tol * max(scale, 1.0):
        raise ValueError(f"vorticity has nonzero mean {c[0, 0].real:.3e}; no periodic stream function")
    c[0, 0] = 0.0
    g = omega.grid
    psi = -c * g.inv_kmag2
    v1 = -1j * g.dk2 * psi
    v2 = 1j * g.dk1 * psi
    return VectorField(SpectralField(g, v1), SpectralField(g, v2), True)


def dealias(f: SpectralField) -> SpectralField:
    return f.with_coeffs(np.where(f.grid.dealias_mask, f.coeffs, 0.0))


def leray_project(u: VectorField) -> VectorField:
    """Remove the gradient part: u - k (k.u) / |k|^2."""
    g = u.grid
    a, b = u.u1.coeffs, u.u2.coeffs
    kdotu = (g.dk1 * a + g.dk2 * b) * g.inv_kmag2
    out = VectorField(u.u1.with_coeffs(a - g.dk1 * kdotu), u.u2.with_coeffs(b - g.dk2 * kdotu))
    # solenoidal by construction; the relative defect check misfires when the
    # projection is round-off sized (e.g. projecting a pure gradient)
    object.__setattr__(out, "divergence_free", True)
    return out


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pseudo-spectral product, dealiased with the 2/3 rule."""
    f._check(g)
    vals = f.physical() * g.physical()
    return dealias(SpectralField.from_physical(f.grid, vals))


def lp_norm(f: Union[SpectralField, VectorField, np.ndarray], p: float, grid: Grid = None) -> float:
    """Rectangle-rule L^p norm over the torus; p = inf is the collocation max.

    Vector fields use the pointwise Euclidean magnitude.  A raw physical
    array may be passed together with its ``grid``.
    """
    p = float(p)
    if not p >= 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    if isinstance(f, VectorField):
        vals, grid = f.magnitude(), f.grid
    elif isinstance(f, SpectralField):
        vals, grid = np.abs(f.physical()), f.grid
    else:
        if grid is None:
            raise ValueError("a grid is required for raw arrays")
        vals = np.abs(f)
    return _lp(vals, p, grid.cell_area)


def _lp(absvals: np.ndarray, p: float, cell_area: float) -> float:
    if math.isinf(p):
        return float(np.max(absvals))
    if p == 2.0:
        return float(math.sqrt(np.sum(absvals * absvals) * cell_area))
    if p == 1.0:
        return float(np.sum(absvals) * cell_area)
    return float((np.sum(absvals**p) * cell_area) ** (1.0 / p))
