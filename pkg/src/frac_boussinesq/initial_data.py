"""Band-limited initial data and random field ensembles."""
from __future__ import annotations

import math
from typing import Optional, Union

import numpy as np

from .littlewood_paley import DEFAULT_PARTITION, DyadicPartition, dyadic_block
from .spectral import Grid, SpectralField, VectorField, _mirror, dealias, fft2

__all__ = [
    "random_field",
    "random_block",
    "euler_eigen",
    "gaussian_bump",
    "single_block",
    "shear_velocity",
    "make_rng",
]

RngLike = Union[int, np.random.Generator, None]


def make_rng(seed: RngLike) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _normalise(f: SpectralField, amplitude: Optional[float]) -> SpectralField:
    if amplitude is None:
        return f
    peak = np.max(np.abs(f.physical()))
    if peak == 0:
        return f
    return f * (amplitude / peak)


def random_field(grid: Grid, seed: RngLike = None, slope: float = 2.0,
                 kmax: Optional[float] = None, amplitude: Optional[float] = 1.0,
                 mean_zero: bool = True) -> SpectralField:
    """Random real field with power-law amplitudes |k|^-slope and uniform phases.

    Modes with |k| > kmax (default: the dealiasing radius) are empty, so the
    result is band-limited.  Phases are antisymmetrised across k -> -k so the
    coefficients are exactly Hermitian.  ``amplitude`` rescales to that L^inf
    norm; pass ``None`` to keep the raw spectrum.
    """
    rng = make_rng(seed)
    k = grid.kmag
    kmax = grid.retained_radius if kmax is None else kmax
    phase = rng.uniform(0.0, 2 * math.pi, size=k.shape)
    phase = phase - _mirror(phase)
    amp = np.zeros_like(k)
    nz = k > 0
    amp[nz] = k[nz] ** (-float(slope))
    if not mean_zero:
        amp[0, 0] = 1.0
    amp[(k > kmax) | ~grid.dealias_mask] = 0.0
    coeffs = amp * np.exp(1j * phase)
    # self-conjugate modes must be real
    coeffs = 0.5 * (coeffs + np.conj(_mirror(coeffs)))
    return _normalise(SpectralField(grid, coeffs), amplitude)


def random_block(grid: Grid, q: int, seed: RngLike = None, slope: float = 2.0,
                 amplitude: Optional[float] = 1.0,
                 partition: DyadicPartition = DEFAULT_PARTITION) -> SpectralField:
    """Delta_q of a random field, normalised to the given L^inf amplitude."""
    f = random_field(grid, seed, slope, amplitude=None)
    return _normalise(dyadic_block(f, q, partition), amplitude)


def single_block(grid: Grid, q: int, seed: RngLike = 0, amplitude: float = 1.0,
                 partition: DyadicPartition = DEFAULT_PARTITION) -> SpectralField:
    """Initial datum whose spectrum sits in the ring of block q only."""
    return random_block(grid, q, seed, slope=0.0, amplitude=amplitude, partition=partition)


def euler_eigen(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> SpectralField:
    """``amplitude * sin(m x1) sin(m x2)``: a steady state of 2D Euler."""
    s = grid.scale * mode
    return SpectralField.from_function(grid, lambda x, y: amplitude * np.sin(s * x) * np.sin(s * y))


def gaussian_bump(grid: Grid, width: float = 0.5, amplitude: float = 1.0,
                  center: Optional[tuple[float, float]] = None) -> SpectralField:
    """Periodised Gaussian, dealiased so that it is band-limited."""
    L = grid.box_length
    cx, cy = center if center is not None else (L / 2, L / 2)
    x1, x2 = grid.coords
    vals = np.zeros_like(x1)
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            vals += np.exp(-((x1 - cx + i * L) ** 2 + (x2 - cy + j * L) ** 2) / (2 * width**2))
    f = dealias(SpectralField(grid, fft2(vals)))
    return f * amplitude


def shear_velocity(grid: Grid, amplitude: float = 1.0, mode: int = 1) -> VectorField:
    """Steady shear v = (amplitude * sin(m x2), 0)."""
    s = grid.scale * mode
    x1, x2 = grid.coords
    return VectorField.from_physical(grid, amplitude * np.sin(s * x2), np.zeros_like(x1),
                                     divergence_free=True)
