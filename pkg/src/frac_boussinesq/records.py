"""Binary trajectory records and CSV summaries.

Binary layout (all little-endian)::

    magic    4 bytes   b"FBTR"
    version  uint32    1
    kind     uint32    0 = transport, 1 = boussinesq
    n        uint32    grid points per side
    count    uint32    number of snapshots
    L        float64   box length
    alpha    float64   NaN when dissipation is off
    then per snapshot:
        t, V_accum, lip_theta_accum, dissipation   4 x float64
        omega coefficients                          n*n complex128
        theta coefficients                          n*n complex128
"""
from __future__ import annotations

import csv
import io
import math
import struct
from pathlib import Path
from typing import List, Union

import numpy as np

from .spectral import Grid, SpectralField, lp_norm
from .solvers import SolverState, Trajectory, kinetic_energy

__all__ = [
    "MAGIC",
    "VERSION",
    "FormatError",
    "write_trajectory",
    "read_trajectory",
    "summary_rows",
    "write_summary_csv",
    "SUMMARY_COLUMNS",
    "format_float",
]

MAGIC = b"FBTR"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIdd")
_SNAP = struct.Struct("<4d")
_KINDS = {"transport": 0, "boussinesq": 1}

SUMMARY_COLUMNS = ["t", "theta_linf", "omega_linf", "omega_lp", "V", "energy"]


class FormatError(ValueError):
    pass


def write_trajectory(path: Union[str, Path], traj: Trajectory) -> None:
    n = traj.grid.n
    alpha = math.nan if traj.alpha is None else float(traj.alpha)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, _KINDS[traj.kind], n, len(traj.states),
                              traj.grid.box_length, alpha))
        for s in traj.states:
            fh.write(_SNAP.pack(s.t, s.V_accum, s.lip_theta_accum, s.dissipation))
            fh.write(np.ascontiguousarray(s.omega.coeffs, dtype="<c16").tobytes())
            fh.write(np.ascontiguousarray(s.theta.coeffs, dtype="<c16").tobytes())


def read_trajectory(path: Union[str, Path]) -> Trajectory:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise FormatError("file too short for a trajectory header")
    magic, version, kind, n, count, L, alpha = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported trajectory format version {version}")
    kinds = {v: k for k, v in _KINDS.items()}
    if kind not in kinds:
        raise FormatError(f"unknown trajectory kind code {kind}")
    grid = Grid(n, L)
    block = n * n * 16
    expected = _HEADER.size + count * (_SNAP.size + 2 * block)
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes, found {len(data)}")
    off = _HEADER.size
    states: List[SolverState] = []
    for _ in range(count):
        t, V, lip, diss = _SNAP.unpack_from(data, off)
        off += _SNAP.size
        w = np.frombuffer(data, dtype="<c16", count=n * n, offset=off).reshape(n, n)
        off += block
        th = np.frombuffer(data, dtype="<c16", count=n * n, offset=off).reshape(n, n)
        off += block
        states.append(SolverState(omega=SpectralField(grid, w.copy()), theta=SpectralField(grid, th.copy()),
                                  t=t, V_accum=V, lip_theta_accum=lip, dissipation=diss))
    return Trajectory(grid=grid, alpha=None if math.isnan(alpha) else alpha,
                      kind=kinds[kind], config=None, states=states)


def format_float(x: float) -> str:
    """Shortest round-tripping representation; stable across runs."""
    return repr(float(x))


def summary_rows(traj: Trajectory, p: float = 2.0) -> List[dict]:
    rows = []
    for i, s in enumerate(traj.states):
        v = traj.velocity(i)
        rows.append({
            "t": s.t,
            "theta_linf": lp_norm(s.theta, np.inf),
            "omega_linf": lp_norm(s.omega, np.inf),
            "omega_lp": lp_norm(s.omega, p),
            "V": s.V_accum,
            "energy": kinetic_energy(v),
        })
    return rows


def write_summary_csv(path: Union[str, Path], traj: Trajectory, p: float = 2.0) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for row in summary_rows(traj, p):
        w.writerow([format_float(row[c]) for c in SUMMARY_COLUMNS])
    Path(path).write_text(buf.getvalue())
