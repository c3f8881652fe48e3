"""Dyadic partition of unity, frequency blocks and Besov-type norms.

The low-frequency profile ``chi`` equals 1 on ``|xi| <= 3/4`` and vanishes
for ``|xi| >= 4/3``; the ring profile is obtained by telescoping,
``phi(xi) = chi(xi/2) - chi(xi)``, so that

    chi(xi) + sum_{q=0}^{Q} phi(2^-q xi) = chi(2^-(Q+1) xi)

holds to rounding error and the partition sums to one wherever the last
dilate of ``chi`` is still flat.

Block indices run over ``q = -1, 0, ..., q_max(grid)`` where ``q_max`` is the
largest q with ``2^q * 3/4 <= n/3``.  ``Delta_{-1} = S_0`` keeps the zero mode.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence, Union

import numpy as np
from scipy.integrate import trapezoid

from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    _lp,
    fft2,
    ifft2,
)

__all__ = [
    "DyadicPartition",
    "DEFAULT_PARTITION",
    "BlockDecomposition",
    "BesovIndex",
    "TimeSeriesNorm",
    "build_partition",
    "smooth_step",
    "dyadic_block",
    "low_pass",
    "decompose",
    "bony_decompose",
    "block_norms",
    "besov_norm",
    "time_norm",
    "block_time_series",
    "chemin_lerner_norm",
    "mixed_time_norm",
    "commutator",
    "besov_profile_rows",
    "write_besov_csv",
]


def smooth_step(t: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for t <= 0, 1 for t >= 1, built from exp(-1/t)."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        s = 1.0 - t
        b = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        out = a / (a + b)
    out = np.where(t <= 0, 0.0, out)
    return np.where(t >= 1, 1.0, out)


@dataclass(frozen=True)
class DyadicPartition:
    """Radial profiles chi and phi with ``chi = 1`` below ``inner`` and 0 above ``outer``."""

    inner: float = 0.75
    outer: float = 4.0 / 3.0

    def __post_init__(self):
        if not (0 < self.inner < self.outer < 2 * self.inner):
            raise ValueError(
                "transition radii must satisfy 0 < inner < outer < 2*inner "
                f"(got inner={self.inner}, outer={self.outer})"
            )

    def chi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return 1.0 - smooth_step((r - self.inner) / (self.outer - self.inner))

    def phi(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        return self.chi(r / 2.0) - self.chi(r)

    @property
    def phi_support(self) -> tuple[float, float]:
        return self.inner, 2.0 * self.outer

    def q_max(self, grid: Grid) -> int:
        radius = grid.n / 3.0 * grid.scale
        return int(math.floor(math.log2(radius / self.inner) + 1e-12))

    def q_range(self, grid: Grid) -> range:
        return range(-1, self.q_max(grid) + 1)

    def multiplier(self, grid: Grid, q: int) -> np.ndarray:
        return _block_masks(self, grid)[q + 1]

    def low_multiplier(self, grid: Grid, q: int) -> np.ndarray:
        if q < 0:
            return np.zeros((grid.n, grid.n))
        return self.chi(grid.kmag / 2.0**q)

    def partition_defect(self, grid: Grid) -> float:
        """max |chi + sum_q phi_q - 1| over frequencies with |k| <= n/3."""
        masks = _block_masks(self, grid)
        total = np.sum(masks, axis=0)
        keep = grid.kmag <= grid.n / 3.0 * grid.scale
        return float(np.max(np.abs(total[keep] - 1.0)))


DEFAULT_PARTITION = DyadicPartition()


def build_partition(inner: float = 0.75, outer: float = 4.0 / 3.0) -> DyadicPartition:
    return DyadicPartition(inner, outer)


@lru_cache(maxsize=32)
def _block_masks(partition: DyadicPartition, grid: Grid) -> np.ndarray:
    qmax = partition.q_max(grid)
    k = grid.kmag
    masks = np.empty((qmax + 2, grid.n, grid.n))
    masks[0] = partition.chi(k)
    for q in range(qmax + 1):
        masks[q + 1] = partition.phi(k / 2.0**q)
    masks.flags.writeable = False
    return masks


def _check_q(partition: DyadicPartition, grid: Grid, q: int):
    qmax = partition.q_max(grid)
    if not (-1 <= q <= qmax):
        raise ValueError(f"block index {q} outside [-1, {qmax}] for n={grid.n}")


def dyadic_block(f, q: int, partition: DyadicPartition = DEFAULT_PARTITION):
    """Delta_q f for a scalar or vector field."""
    if isinstance(f, VectorField):
        return VectorField(dyadic_block(f.u1, q, partition), dyadic_block(f.u2, q, partition))
    _check_q(partition, f.grid, q)
    return f.with_coeffs(partition.multiplier(f.grid, q) * f.coeffs)


def low_pass(f, q: int, partition: DyadicPartition = DEFAULT_PARTITION):
    """S_q f = chi(2^-q D) f, which equals sum_{p<=q-1} Delta_p f; S_q = 0 for q <= -1."""
    if isinstance(f, VectorField):
        return VectorField(low_pass(f.u1, q, partition), low_pass(f.u2, q, partition))
    return f.with_coeffs(partition.low_multiplier(f.grid, q) * f.coeffs)


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    blocks: dict
    source: SpectralField

    def reconstruct(self) -> SpectralField:
        total = sum(b.coeffs for b in self.blocks.values())
        return self.source.with_coeffs(total)

    def __getitem__(self, q: int) -> SpectralField:
        return self.blocks[q]


def decompose(f: SpectralField, partition: DyadicPartition = DEFAULT_PARTITION) -> BlockDecomposition:
    blocks = {q: dyadic_block(f, q, partition) for q in partition.q_range(f.grid)}
    return BlockDecomposition(blocks, f)


def _physical_blocks(f: SpectralField, partition: DyadicPartition) -> np.ndarray:
    masks = _block_masks(partition, f.grid)
    return np.stack([ifft2(m * f.coeffs) for m in masks])


def bony_decompose(u: SpectralField, v: SpectralField,
                   partition: DyadicPartition = DEFAULT_PARTITION):
    """Split ``u v`` into the paraproducts ``T_u v``, ``T_v u`` and remainder ``R(u, v)``.

    ``T_u v = sum_q S_{q-1} u * Delta_q v`` and
    ``R(u, v) = sum_{|q-q'|<=1} Delta_q u * Delta_q' v``; every product is
    taken pointwise and the sums dealiased once.
    """
    if u.grid != v.grid:
        raise ValueError("fields live on different grids")
    grid = u.grid
    bu = _physical_blocks(u, partition)
    bv = _physical_blocks(v, partition)
    # low[i] = S_{q-1} u for the block at position i (q = i - 1)
    low_u = np.concatenate([np.zeros((2,) + bu.shape[1:]), np.cumsum(bu, axis=0)[:-2]])
    low_v = np.concatenate([np.zeros((2,) + bv.shape[1:]), np.cumsum(bv, axis=0)[:-2]])
    t_uv = np.sum(low_u * bv, axis=0)
    t_vu = np.sum(low_v * bu, axis=0)
    near = bv.copy()
    near[1:] += bv[:-1]
    near[:-1] += bv[1:]
    r_uv = np.sum(bu * near, axis=0)
    mask = grid.dealias_mask

    def _to_field(vals):
        return SpectralField(grid, np.where(mask, fft2(vals), 0.0))

    return _to_field(t_uv), _to_field(t_vu), _to_field(r_uv)


@dataclass(frozen=True)
class BesovIndex:
    """Regularity ``s``, integrability ``p`` and summation ``r`` of B^s_{p,r}."""

    s: float
    p: float = 2.0
    r: float = 2.0

    def __post_init__(self):
        if not float(self.p) >= 1:
            raise ValueError(f"Besov integrability p must be >= 1, got {self.p}")
        if not float(self.r) >= 1:
            raise ValueError(f"Besov summation r must be >= 1, got {self.r}")


def block_norms(f: Union[SpectralField, VectorField], p: float,
                partition: DyadicPartition = DEFAULT_PARTITION) -> np.ndarray:
    """``||Delta_q f||_{L^p}`` for q = -1..q_max (index 0 is q = -1)."""
    p = float(p)
    if isinstance(f, VectorField):
        g = f.grid
        b1 = _physical_blocks(f.u1, partition)
        b2 = _physical_blocks(f.u2, partition)
        mags = np.hypot(b1, b2)
    else:
        g = f.grid
        mags = np.abs(_physical_blocks(f, partition))
    return np.array([_lp(m, p, g.cell_area) for m in mags])


def _lr(values: np.ndarray, r: float, axis: int = 0) -> np.ndarray:
    r = float(r)
    if math.isinf(r):
        return np.max(values, axis=axis)
    return np.sum(values**r, axis=axis) ** (1.0 / r)


def _weights(grid: Grid, s: float, partition: DyadicPartition) -> np.ndarray:
    qs = np.arange(-1, partition.q_max(grid) + 1)
    return 2.0 ** (qs * float(s))


def besov_norm(f: Union[SpectralField, VectorField], idx: BesovIndex,
               partition: DyadicPartition = DEFAULT_PARTITION) -> float:
    """``|| (2^{qs} ||Delta_q f||_{L^p})_q ||_{l^r}`` over the retained blocks."""
    norms = block_norms(f, idx.p, partition)
    return float(_lr(_weights(f.grid, idx.s, partition) * norms, idx.r))


def time_norm(values: np.ndarray, times: np.ndarray, rho: float, axis: int = -1) -> np.ndarray:
    """L^rho in time via the trapezoid rule on |values|^rho; rho = inf is the max."""
    values = np.abs(np.asarray(values, dtype=float))
    rho = float(rho)
    if rho < 1:
        raise ValueError(f"time exponent must be >= 1, got {rho}")
    if math.isinf(rho):
        return np.max(values, axis=axis)
    integral = trapezoid(values**rho, x=times, axis=axis)
    return integral ** (1.0 / rho)


@dataclass(frozen=True, eq=False)
class TimeSeriesNorm:
    """Per-block, per-time values ``||Delta_q f(t_i)||_{L^p}``.

    ``values[i_q, i_t]`` with ``i_q = q + 1``.
    """

    times: np.ndarray
    values: np.ndarray
    p: float
    rho: float = 1.0
    grid: Grid = None
    qs: np.ndarray = field(default=None)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.size == 0 or values.size == 0:
            raise ValueError("empty time series")
        if values.ndim != 2 or values.shape[1] != times.size:
            raise ValueError(f"values shape {values.shape} does not match {times.size} times")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("block norms must be non-negative")
        if float(self.rho) < 1:
            raise ValueError(f"time exponent must be >= 1, got {self.rho}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        if self.qs is None:
            object.__setattr__(self, "qs", np.arange(-1, values.shape[0] - 1))

    def with_rho(self, rho: float) -> "TimeSeriesNorm":
        return TimeSeriesNorm(self.times, self.values, self.p, rho, self.grid, self.qs)

    @property
    def horizon(self) -> float:
        return float(self.times[-1] - self.times[0])


def block_time_series(fields: Sequence[Union[SpectralField, VectorField]], times: Iterable[float],
                      p: float, rho: float = 1.0,
                      partition: DyadicPartition = DEFAULT_PARTITION) -> TimeSeriesNorm:
    fields = list(fields)
    if not fields:
        raise ValueError("empty time series")
    values = np.stack([block_norms(f, p, partition) for f in fields], axis=1)
    return TimeSeriesNorm(np.asarray(list(times), dtype=float), values, float(p), rho, fields[0].grid)


def _check_series(series: TimeSeriesNorm, idx: BesovIndex):
    if float(series.p) != float(idx.p):
        raise ValueError(f"series was built with p={series.p}, index asks p={idx.p}")


def chemin_lerner_norm(series: TimeSeriesNorm, idx: BesovIndex) -> float:
    """``|| (2^{qs} ||Delta_q f||_{L^rho_T L^p})_q ||_{l^r}`` (time norm inside)."""
    _check_series(series, idx)
    w = 2.0 ** (series.qs * float(idx.s))
    inner = time_norm(series.values, series.times, series.rho, axis=1)
    return float(_lr(w * inner, idx.r))


def mixed_time_norm(series: TimeSeriesNorm, idx: BesovIndex) -> float:
    """``|| ||f(t)||_{B^s_{p,r}} ||_{L^rho_T}`` (time norm outside)."""
    _check_series(series, idx)
    w = 2.0 ** (series.qs * float(idx.s))
    besov_t = _lr(w[:, None] * series.values, idx.r, axis=0)
    return float(time_norm(besov_t, series.times, series.rho))


def commutator(q: int, v: VectorField, u: SpectralField,
               partition: DyadicPartition = DEFAULT_PARTITION, div_tol: float = 1e-10) -> SpectralField:
    """[Delta_q, v.grad] u = Delta_q(v.grad u) - v.grad(Delta_q u), products dealiased."""
    if v.divergence_defect() > div_tol:
        raise ValueError("commutator requires a divergence-free velocity")
    g = u.grid
    _check_q(partition, g, q)
    m = partition.multiplier(g, q)
    v1, v2 = v.physical()

    def transport(c):
        return fft2(v1 * ifft2(1j * g.dk1 * c) + v2 * ifft2(1j * g.dk2 * c))

    c = u.coeffs
    out = m * transport(c) - transport(m * c)
    return SpectralField(g, np.where(g.dealias_mask, out, 0.0))


def besov_profile_rows(f: SpectralField, idx: BesovIndex,
                       partition: DyadicPartition = DEFAULT_PARTITION) -> list[tuple[int, float]]:
    """Rows ``(q, 2^{qs} ||Delta_q f||_{L^p})`` for plotting."""
    norms = block_norms(f, idx.p, partition)
    w = _weights(f.grid, idx.s, partition)
    return [(int(q), float(x)) for q, x in zip(partition.q_range(f.grid), w * norms)]


def write_besov_csv(path, f: SpectralField, idx: BesovIndex,
                    partition: DyadicPartition = DEFAULT_PARTITION) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["q", "weighted_block_norm"])
        for q, x in besov_profile_rows(f, idx, partition):
            w.writerow([q, repr(x)])
