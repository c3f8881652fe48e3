"""Measured ratios and fitted constants for the estimates used in the analysis.

Every check returns a :class:`VerificationReport`.  A report carries one row
per sample (and per dyadic index where relevant), aggregates ``min / median /
max`` of each named statistic and a list of :class:`Constraint` objects.  The
status is a pure function of those aggregates:

* ``fail`` if a constrained statistic is non-finite or violates its bound,
* ``inconclusive`` if a fit residual exceeds its limit (checked first),
* ``pass`` otherwise.

Ratios are formed with :func:`safe_ratio`, so an RHS of zero never raises:
it yields 0 when the LHS is negligible and ``inf`` (a hard failure) if not.
Unless stated otherwise all implicit constants on the right-hand sides are
set to one; the tolerances absorb them.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .initial_data import random_field
from .littlewood_paley import (
    DEFAULT_PARTITION,
    BesovIndex,
    DyadicPartition,
    block_norms,
    dyadic_block,
    low_pass,
)
from .solvers import StabilityReport, Trajectory, compare_twin_responses
from .sources import SourceFunction
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    _lp,
    as_order,
    fft2,
    ifft2,
    lp_norm,
)

__all__ = [
    "PASS",
    "INCONCLUSIVE",
    "FAIL",
    "Constraint",
    "EnsembleSpec",
    "CheckSpec",
    "VerificationReport",
    "aggregate",
    "decide_status",
    "safe_ratio",
    "write_reports_json",
    "write_reports_csv",
    "check_generalized_bernstein",
    "check_positivity_corollary",
    "check_semigroup_decay",
    "check_bernstein_sandwich",
    "check_almost_orthogonality",
    "check_composition",
    "check_max_principle",
    "check_smoothing_lr",
    "check_smoothing_linf",
    "check_besov_smoothing",
    "track_apriori_cascade",
    "check_transport_besov",
    "check_twin_stability",
    "minimal_envelope_constant",
    "run_check",
]

PASS, INCONCLUSIVE, FAIL = "pass", "inconclusive", "fail"


# ---------------------------------------------------------------------------
# report plumbing

def safe_ratio(lhs: float, rhs: float, floor: float = 0.0) -> float:
    """lhs / rhs; 0 when both are negligible, inf when only rhs vanishes."""
    lhs, rhs = float(lhs), float(rhs)
    if not (math.isfinite(lhs) and math.isfinite(rhs)):
        return math.inf
    if rhs <= 0.0:
        return 0.0 if lhs <= floor else math.inf
    return max(lhs, 0.0) / rhs if lhs > floor else 0.0


def aggregate(values: Iterable[float]) -> Dict[str, float]:
    vals = np.array([float(v) for v in values], dtype=float)
    if vals.size == 0:
        return {"min": math.nan, "median": math.nan, "max": math.nan, "count": 0}
    if np.any(np.isnan(vals)):
        return {"min": math.nan, "median": math.nan, "max": math.nan, "count": int(vals.size)}
    return {"min": float(np.min(vals)), "median": float(np.median(vals)),
            "max": float(np.max(vals)), "count": int(vals.size)}


@dataclass(frozen=True)
class Constraint:
    stat: str
    lower: Optional[float] = None
    upper: Optional[float] = None

    def holds(self, agg: Dict[str, float]) -> bool:
        lo, hi = agg["min"], agg["max"]
        if agg.get("count", 1) == 0 or not (math.isfinite(lo) and math.isfinite(hi)):
            return False
        if self.lower is not None and lo < self.lower:
            return False
        if self.upper is not None and hi > self.upper:
            return False
        return True

    def to_dict(self):
        return {"stat": self.stat, "lower": self.lower, "upper": self.upper}


def decide_status(aggregates: Dict[str, Dict[str, float]], constraints: Sequence[Constraint],
                  inconclusive: Optional[Dict[str, float]] = None) -> str:
    for c in constraints:
        agg = aggregates[c.stat]
        if agg.get("count", 1) and not (math.isfinite(agg["min"]) and math.isfinite(agg["max"])):
            return FAIL
    for stat, limit in (inconclusive or {}).items():
        agg = aggregates.get(stat)
        if agg and agg.get("count", 0) and agg["max"] > limit:
            return INCONCLUSIVE
    return PASS if all(c.holds(aggregates[c.stat]) for c in constraints) else FAIL


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


@dataclass
class VerificationReport:
    name: str
    params: dict
    samples: List[dict]
    aggregates: Dict[str, Dict[str, float]]
    constraints: List[Constraint]
    fitted: dict
    status: str
    provenance: dict
    notes: List[str] = field(default_factory=list)
    inconclusive: Dict[str, float] = field(default_factory=dict)

    @classmethod
    def build(cls, name: str, params: dict, samples: List[dict], constraints: Sequence[Constraint],
              fitted: Optional[dict] = None, provenance: Optional[dict] = None,
              notes: Optional[List[str]] = None, inconclusive: Optional[Dict[str, float]] = None,
              stats: Sequence[str] = ()) -> "VerificationReport":
        names = list(dict.fromkeys([c.stat for c in constraints] + list(inconclusive or {}) + list(stats)))
        aggs = {s: aggregate(row[s] for row in samples if s in row) for s in names}
        status = decide_status(aggs, constraints, inconclusive)
        return cls(name, dict(params), list(samples), aggs, list(constraints), dict(fitted or {}),
                   status, dict(provenance or {}), list(notes or []), dict(inconclusive or {}))

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def stat(self, name: str, which: str = "max") -> float:
        return self.aggregates[name][which]

    def to_dict(self) -> dict:
        hard = any(not (math.isfinite(a["min"]) and math.isfinite(a["max"]))
                   for a in self.aggregates.values() if a.get("count", 0))
        return _jsonable({
            "name": self.name,
            "params": self.params,
            "aggregates": self.aggregates,
            "constraints": [c.to_dict() for c in self.constraints],
            "inconclusive_limits": self.inconclusive,
            "fitted": self.fitted,
            "status": self.status,
            "hard_failure": hard,
            "provenance": self.provenance,
            "notes": self.notes,
            "n_samples": len(self.samples),
        })


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return str(int(v))
    return str(v)


def reports_to_json(reports: Sequence[VerificationReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True) + "\n"


def write_reports_json(path, reports: Sequence[VerificationReport]) -> None:
    Path(path).write_text(reports_to_json(reports))


def reports_to_csv(reports: Sequence[VerificationReport]) -> str:
    keys = sorted({k for r in reports for row in r.samples for k in row})
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check"] + keys)
    for r in reports:
        for row in r.samples:
            w.writerow([r.name] + [_fmt(row[k]) if k in row else "" for k in keys])
    return buf.getvalue()


def write_reports_csv(path, reports: Sequence[VerificationReport]) -> None:
    Path(path).write_text(reports_to_csv(reports))


# ---------------------------------------------------------------------------
# ensembles

@dataclass(frozen=True)
class EnsembleSpec:
    """``count`` random fields with spectrum |k|^-slope on an n x n grid."""

    count: int = 16
    seed: int = 0
    slope: float = 2.0
    n: int = 64

    def __post_init__(self):
        if int(self.count) < 1:
            raise ValueError(f"ensemble count must be >= 1, got {self.count}")
        Grid(self.n)

    @property
    def grid(self) -> Grid:
        return Grid(self.n)

    def fields(self) -> List[SpectralField]:
        children = np.random.SeedSequence(int(self.seed)).spawn(int(self.count))
        g = self.grid
        return [random_field(g, np.random.default_rng(c), self.slope) for c in children]

    def provenance(self, **extra) -> dict:
        d = {"seed": int(self.seed), "n": self.n, "count": int(self.count), "slope": self.slope}
        d.update(extra)
        return d


def _q_list(grid: Grid, q_range, partition: DyadicPartition, lowest: int = 0) -> List[int]:
    qmax = partition.q_max(grid)
    if q_range is None:
        return list(range(lowest, qmax + 1))
    qs = list(q_range)
    bad = [q for q in qs if not -1 <= q <= qmax]
    if bad:
        raise ValueError(f"block indices {bad} outside [-1, {qmax}] for n={grid.n}")
    return qs


def _signed_power(x: np.ndarray, p: float) -> np.ndarray:
    """|x|^{p-2} x, taken to be 0 at x = 0."""
    return np.sign(x) * np.abs(x) ** (p - 1.0)


def _check_p(p: float):
    if not float(p) > 1:
        raise ValueError(f"exponent p must exceed 1, got {p}")


# ---------------------------------------------------------------------------
# ensemble checks

def check_generalized_bernstein(ensemble: EnsembleSpec, alpha: float, p: float,
                                q_range=None, tolerance: float = 0.05,
                                partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """R(j) = int (|D|^a G_j) |G_j|^{p-2} G_j / (2^{ja} ||G_j||_p^p) over blocks G_j."""
    _check_p(p)
    a = as_order(alpha).alpha
    g = ensemble.grid
    qs = _q_list(g, q_range, partition)
    ka = g.kmag ** a
    rows = []
    for i, f in enumerate(ensemble.fields()):
        for j in qs:
            G = dyadic_block(f, j, partition)
            vals = G.physical()
            if not np.any(vals):
                continue
            dg = ifft2(ka * G.coeffs)
            num = float(np.sum(dg * _signed_power(vals, p)) * g.cell_area)
            den = 2.0 ** (j * a) * float(np.sum(np.abs(vals) ** p) * g.cell_area)
            rows.append({"sample": i, "q": j, "lhs": num, "rhs": den, "ratio": safe_ratio(num, den)})
    notes = []
    if a > 1:
        notes.append("alpha above 1: beyond the range where this inequality was established")
    fitted = {}
    if p == 2:
        fitted["analytic_floor"] = (partition.inner) ** a
    return VerificationReport.build(
        "generalized_bernstein", {"alpha": a, "p": p, "q": qs, "tolerance": tolerance}, rows,
        [Constraint("ratio", lower=tolerance)], fitted, ensemble.provenance(alpha=a), notes)


def positivity_margin(f: SpectralField, alpha: float, p: float) -> tuple[float, float, float]:
    """(LHS, RHS, (RHS - LHS) / |RHS|) of the positivity inequality for one field."""
    _check_p(p)
    g = f.grid
    ka = g.kmag ** as_order(alpha).alpha
    vals = f.physical()
    rhs = float(np.sum(ifft2(ka * f.coeffs) * _signed_power(vals, p)) * g.cell_area)
    h = fft2(np.abs(vals) ** (p / 2.0))
    lhs = 4.0 * (p - 1.0) / p**2 * g.box_length**2 * float(np.sum(ka * np.abs(h) ** 2))
    margin = (rhs - lhs) / abs(rhs) if rhs != 0 else (0.0 if lhs == 0 else -math.inf)
    return lhs, rhs, margin


def check_positivity_corollary(ensemble: EnsembleSpec, alpha: float, p: float,
                               tolerance: float = -1e-8) -> VerificationReport:
    """Relative margin (RHS - LHS) / RHS with
    LHS = 4(p-1)/p^2 || |D|^{a/2} |G|^{p/2} ||_2^2 and RHS = int (|D|^a G)|G|^{p-2}G."""
    _check_p(p)
    a = as_order(alpha).alpha
    rows = []
    for i, f in enumerate(ensemble.fields()):
        lhs, rhs, margin = positivity_margin(f, a, p)
        rows.append({"sample": i, "lhs": lhs, "rhs": rhs, "margin": margin})
    notes = []
    if a > 1:
        notes.append("alpha above 1: outside the stated range of the corollary")
    return VerificationReport.build(
        "positivity_corollary", {"alpha": a, "p": p, "tolerance": tolerance}, rows,
        [Constraint("margin", lower=tolerance)], {}, ensemble.provenance(alpha=a), notes)


def check_semigroup_decay(ensemble: EnsembleSpec, alpha: float, p: float, j_range=None,
                          rate_bounds=(0.2, 3.0), C_max: float = 10.0, residual_max: float = 0.1,
                          n_times: int = 9, horizon: float = 1.0, single_mode: bool = False,
                          partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """Fit log ||e^{-t|D|^a} u_j||_p = log C - rate t on t in [0, horizon / 2^{ja}].

    Reports rate / 2^{ja} and C per block.  ``single_mode`` replaces the random
    blocks by cos(2^j x1), whose rate is exactly 2^{ja}.
    """
    a = as_order(alpha).alpha
    p = float(p)
    if p < 1:
        raise ValueError(f"exponent p must be >= 1, got {p}")
    g = ensemble.grid
    qs = _q_list(g, j_range, partition)
    ka = g.kmag ** a
    rows = []
    sources = ([("mode", None)] if single_mode else list(enumerate(ensemble.fields())))
    for i, f in sources:
        for j in qs:
            if single_mode:
                u = SpectralField.single_mode(g, 2**j, 0)
            else:
                u = dyadic_block(f, j, partition)
            n0 = lp_norm(u, p)
            if n0 == 0:
                continue
            scale = 2.0 ** (j * a)
            ts = np.linspace(0.0, horizon / scale, n_times)
            y = np.array([math.log(_lp(np.abs(ifft2(np.exp(-t * ka) * u.coeffs)), p, g.cell_area) / n0)
                          for t in ts])
            slope, intercept = np.polyfit(ts, y, 1)
            resid = y - (slope * ts + intercept)
            rows.append({"sample": i, "q": j, "rate_ratio": -slope / scale, "C": math.exp(intercept),
                         "fit_residual": float(np.sqrt(np.mean(resid**2)))})
    lo, hi = rate_bounds
    return VerificationReport.build(
        "semigroup_decay" + ("_single_mode" if single_mode else ""),
        {"alpha": a, "p": p, "q": qs, "rate_bounds": list(rate_bounds), "C_max": C_max,
         "horizon": horizon}, rows,
        [Constraint("rate_ratio", lower=lo, upper=hi), Constraint("C", upper=C_max)],
        {}, ensemble.provenance(alpha=a), [], {"fit_residual": residual_max})


def _derivative_multipliers(g: Grid, k: int):
    """Fourier symbols of all partial derivatives of order k."""
    out = []
    for m in range(k + 1):
        out.append((1j * g.dk1) ** (k - m) * (1j * g.dk2) ** m)
    return out


def check_bernstein_sandwich(ensemble: EnsembleSpec, q_range=None, k_values=(1, 2),
                             a_values=(2.0, math.inf), C_max: float = 10.0,
                             partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """Smallest C making each Bernstein inequality hold, per sample, q, k and a.

    Three families: S_q low-pass with b in {a, inf}, and the lower and upper
    bounds on a dyadic block.
    """
    g = ensemble.grid
    qs = _q_list(g, q_range, partition)
    rows = []
    for i, f in enumerate(ensemble.fields()):
        for q in qs:
            S = low_pass(f, q, partition)
            D = dyadic_block(f, q, partition)
            for k in k_values:
                mults = _derivative_multipliers(g, k)
                dS = [np.abs(ifft2(m * S.coeffs)) for m in mults]
                dD = [np.abs(ifft2(m * D.coeffs)) for m in mults]
                for a in a_values:
                    a = float(a)
                    nS = lp_norm(S, a)
                    nD = lp_norm(D, a)
                    for b in sorted({a, math.inf}):
                        sup = max(_lp(d, b, g.cell_area) for d in dS)
                        gap = (1.0 / a) - (0.0 if math.isinf(b) else 1.0 / b)
                        ratio = safe_ratio(sup, 2.0 ** (q * (k + 2 * gap)) * nS, 1e-12 * max(nS, 1e-300))
                        rows.append({"sample": i, "q": q, "k": k, "a": a, "b": b, "family": "low_pass",
                                     "C": ratio ** (1.0 / k)})
                    sup = max(_lp(d, a, g.cell_area) for d in dD)
                    up = safe_ratio(sup, 2.0 ** (q * k) * nD)
                    low = safe_ratio(2.0 ** (q * k) * nD, sup)
                    rows.append({"sample": i, "q": q, "k": k, "a": a, "b": a, "family": "block_upper",
                                 "C": up ** (1.0 / k)})
                    rows.append({"sample": i, "q": q, "k": k, "a": a, "b": a, "family": "block_lower",
                                 "C": low ** (1.0 / k)})
    return VerificationReport.build(
        "bernstein_sandwich", {"q": qs, "k": list(k_values), "a": [float(a) for a in a_values],
                               "C_max": C_max}, rows,
        [Constraint("C", upper=C_max)], {}, ensemble.provenance())


def check_almost_orthogonality(ensemble: EnsembleSpec, tolerance: float = 1e-12,
                               partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """Relative spectral mass of Delta_p Delta_q f for |p - q| >= 2."""
    g = ensemble.grid
    qs = list(partition.q_range(g))
    masks = [partition.multiplier(g, q) for q in qs]
    rows = []
    for i, f in enumerate(ensemble.fields()):
        total = float(np.sum(np.abs(f.coeffs) ** 2))
        worst = 0.0
        for a, p in enumerate(qs):
            for b in range(a + 2, len(qs)):
                mass = float(np.sum(np.abs(masks[a] * masks[b] * f.coeffs) ** 2))
                worst = max(worst, mass / total if total else 0.0)
        rows.append({"sample": i, "relative_mass": worst})
    return VerificationReport.build(
        "almost_orthogonality", {"tolerance": tolerance}, rows,
        [Constraint("relative_mass", upper=tolerance)], {}, ensemble.provenance())


def check_composition(ensemble: EnsembleSpec, F: SourceFunction, p: float = 2.0,
                      s_values: Optional[Sequence[float]] = None, C_max: float = 20.0,
                      partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """C = ||F(theta)||_{B^s_{p,1}} / (M_s ||theta||_{B^s_{p,1}}) on random theta.

    M_s is the largest sup over |x| <= ||theta||_inf of |F^(m)| for
    m = 1 .. [s] + 2, so sources with vanishing higher derivatives (such as
    the linear one) still produce a meaningful constant.
    """
    _check_p(p)
    s_values = list(s_values) if s_values is not None else [0.5, 1.0, 1.0 + 2.0 / p]
    g = ensemble.grid
    rows = []
    for i, theta in enumerate(ensemble.fields()):
        vals = theta.physical()
        radius = float(np.max(np.abs(vals)))
        Fv = VectorField.from_physical(g, *F.evaluate(vals))
        for s in s_values:
            idx = BesovIndex(s, p, 1)
            top = int(math.floor(s)) + 2
            M = max(F.sup_derivative(m, radius) for m in range(1, top + 1))
            lhs = _besov(Fv, idx, partition)
            rhs = M * _besov(theta, idx, partition)
            rows.append({"sample": i, "s": s, "lhs": lhs, "rhs": rhs, "derivative_bound": M,
                         "C": safe_ratio(lhs, rhs, 1e-14)})
    return VerificationReport.build(
        "composition", {"source": F.name, "p": p, "s": s_values, "C_max": C_max}, rows,
        [Constraint("C", upper=C_max)], {}, ensemble.provenance(),
        ["derivative bound uses the max over orders 1..[s]+2"])


def _besov(f, idx: BesovIndex, partition=DEFAULT_PARTITION) -> float:
    norms = block_norms(f, idx.p, partition)
    qs = np.arange(-1, len(norms) - 1)
    w = 2.0 ** (qs * idx.s) * norms
    return float(w.max() if math.isinf(idx.r) else np.sum(w ** idx.r) ** (1.0 / idx.r))


# ---------------------------------------------------------------------------
# time-series helpers

def _cumtrapz(y: np.ndarray, t: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    if y.shape[-1] > 1:
        inc = 0.5 * np.diff(t) * (y[..., 1:] + y[..., :-1])
        out[..., 1:] = np.cumsum(inc, axis=-1)
    return out


def _cum_time_norm(y: np.ndarray, t: np.ndarray, rho: float) -> np.ndarray:
    """Running L^rho([0, t_i]) norm along the last axis."""
    rho = float(rho)
    if math.isinf(rho):
        return np.maximum.accumulate(np.abs(y), axis=-1)
    return _cumtrapz(np.abs(y) ** rho, t) ** (1.0 / rho)


def _block_series(fields, p: float, partition=DEFAULT_PARTITION) -> np.ndarray:
    """Array [q + 1, i_t] of ||Delta_q f(t_i)||_{L^p}."""
    return np.stack([block_norms(f, p, partition) for f in fields], axis=1)


def _traj_provenance(traj: Trajectory, **extra) -> dict:
    d = {"n": traj.grid.n, "alpha": traj.alpha, "kind": traj.kind, "snapshots": len(traj),
         "t_end": float(traj.times[-1])}
    d.update(extra)
    return d


def _alpha_of(traj: Trajectory, alpha: Optional[float]) -> float:
    a = traj.alpha if alpha is None else alpha
    if a is None:
        raise ValueError("this check needs a dissipative trajectory (alpha is unset)")
    return as_order(a).alpha


def _require_omega(traj: Trajectory):
    if any(s.omega is None for s in traj.states):
        raise ValueError("trajectory lacks the vorticity series of its velocity")


# ---------------------------------------------------------------------------
# trajectory checks

def check_max_principle(traj: Trajectory, tol: float = 5e-3,
                        identity_tol: float = 1e-6) -> VerificationReport:
    """L^p bounds for p in {2, inf}, L^2 monotonicity and the dissipation identity."""
    t = traj.times
    f2 = np.array([lp_norm(traj.forcing_at(i), 2) for i in range(len(traj))])
    finf = np.array([lp_norm(traj.forcing_at(i), np.inf) for i in range(len(traj))])
    th2 = np.array([lp_norm(s.theta, 2) for s in traj.states])
    thinf = np.array([lp_norm(s.theta, np.inf) for s in traj.states])
    b2 = th2[0] + _cumtrapz(f2, t)
    binf = thinf[0] + _cumtrapz(finf, t)
    rows = []
    ref = max(thinf[0], 1e-300)
    for i in range(len(traj)):
        row = {"t": t[i], "l2_ratio": safe_ratio(th2[i], b2[i], 1e-14 * ref),
               "linf_ratio": safe_ratio(thinf[i], binf[i], 1e-14 * ref)}
        rows.append(row)
    constraints = [Constraint("l2_ratio", upper=1 + tol), Constraint("linf_ratio", upper=1 + tol)]
    notes = []
    if not traj.has_forcing:
        for i in range(1, len(traj)):
            rows[i]["l2_increase"] = max(0.0, (th2[i] - th2[i - 1]) / max(th2[0], 1e-300))
        constraints.append(Constraint("l2_increase", upper=1e-12))
        if traj.alpha is not None:
            e0 = th2[0] ** 2
            for i, s in enumerate(traj.states):
                rows[i]["identity_residual"] = abs(th2[i] ** 2 + 2 * s.dissipation - e0) / max(e0, 1e-300)
            constraints.append(Constraint("identity_residual", upper=identity_tol))
    else:
        notes.append("forced run: monotonicity and the dissipation identity are not asserted")
    return VerificationReport.build("max_principle", {"tol": tol, "identity_tol": identity_tol},
                                    rows, constraints, {}, _traj_provenance(traj), notes)


def check_smoothing_lr(traj: Trajectory, alpha: Optional[float] = None, r: float = 2.0,
                       rho: float = 1.0, tolerance: float = 20.0,
                       partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """2^{q a/rho} ||Delta_q theta||_{L^rho_t L^r} against
    ||Delta_q theta0||_r + ||theta0||_inf ||omega||_{L^1_t L^r} + ||f||_{L^1_t L^r},
    for q >= 0 at every snapshot time, plus the t^{1/rho} bound for q = -1."""
    a = _alpha_of(traj, alpha)
    _require_omega(traj)
    t = traj.times
    B = _block_series(traj.theta, r, partition)
    w_r = _cumtrapz(np.array([lp_norm(w, r) for w in traj.omega]), t)
    f_r = _cumtrapz(np.array([lp_norm(traj.forcing_at(i), r) for i in range(len(traj))]), t)
    th0 = lp_norm(traj.states[0].theta, np.inf)
    floor = 1e-12 * max(th0, 1e-300)
    LHS = _cum_time_norm(B, t, rho)
    rows = []
    for qi in range(B.shape[0]):
        q = qi - 1
        for i in range(len(t)):
            if q >= 0:
                lhs = 2.0 ** (q * a / rho) * LHS[qi, i]
                rhs = B[qi, 0] + th0 * w_r[i] + f_r[i]
                rows.append({"q": q, "t": t[i], "lhs": lhs, "rhs": rhs,
                             "ratio": safe_ratio(lhs, rhs, floor)})
            else:
                tw = 1.0 if math.isinf(rho) else t[i] ** (1.0 / rho)
                lhs = LHS[qi, i]
                rhs = tw * (B[qi, 0] + th0 * w_r[i] + f_r[i])
                rows.append({"q": q, "t": t[i], "lhs": lhs, "rhs": rhs,
                             "ratio_low": safe_ratio(lhs, rhs, floor)})
    constraints = [Constraint("ratio", upper=tolerance), Constraint("ratio_low", upper=tolerance)]
    notes = []
    if r < 2:
        notes.append("r below 2: ratios recorded but not asserted")
        constraints = []
    return VerificationReport.build("smoothing_lr", {"alpha": a, "r": r, "rho": rho, "tolerance": tolerance},
                                    rows, constraints, {}, _traj_provenance(traj), notes,
                                    stats=("ratio", "ratio_low"))


def _low_velocity_gradient_linf(v: VectorField, partition) -> float:
    g = v.grid
    m = partition.multiplier(g, -1)
    comps = []
    for c in (v.u1.coeffs, v.u2.coeffs):
        comps.extend([ifft2(1j * g.dk1 * m * c), ifft2(1j * g.dk2 * m * c)])
    return float(np.sqrt(np.max(sum(x * x for x in comps))))


def check_smoothing_linf(traj: Trajectory, alpha: Optional[float] = None, tolerance: float = 20.0,
                         slope_max: float = 0.1, rhos: Sequence[float] = (1.0, 2.0, math.inf),
                         partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """2^{q a} int_0^t ||Delta_q theta||_inf against
    ||theta0||_inf (1 + t + (q+2)||omega||_{L^1_t L^inf} + ||grad Delta_{-1} v||_{L^1_t L^inf}),
    and the Lipschitz-velocity variant with ||grad v||_{L^1_t L^inf} for each rho."""
    if traj.has_forcing:
        raise ValueError("the L^inf smoothing estimate is stated for unforced runs")
    a = _alpha_of(traj, alpha)
    _require_omega(traj)
    t = traj.times
    B = _block_series(traj.theta, math.inf, partition)
    w_inf = _cumtrapz(np.array([lp_norm(w, math.inf) for w in traj.omega]), t)
    low_grad = _cumtrapz(np.array([_low_velocity_gradient_linf(traj.velocity(i), partition)
                                   for i in range(len(traj))]), t)
    V = np.array([s.V_accum for s in traj.states])
    th0 = lp_norm(traj.states[0].theta, np.inf)
    floor = 1e-12 * max(th0, 1e-300)
    L1 = _cumtrapz(B, t)
    rows = []
    per_q = []
    for qi in range(B.shape[0]):
        q = qi - 1
        ratios = [safe_ratio(2.0 ** (q * a) * L1[qi, i],
                             th0 * (1 + t[i] + (q + 2) * w_inf[i] + low_grad[i]), floor)
                  for i in range(len(t))]
        worst = max(ratios)
        per_q.append((q, worst))
        rows.append({"q": q, "ratio": worst, "variant": "vorticity"})
        for rho in rhos:
            Ln = _cum_time_norm(B[qi], t, rho)
            lr = max(safe_ratio(2.0 ** (q * a / rho) * Ln[i], th0 * (1 + t[i] + V[i]), floor)
                     for i in range(len(t)))
            rows.append({"q": q, "rho": rho, "lip_ratio": lr, "variant": "lipschitz"})
    qs = np.array([q for q, _ in per_q], dtype=float)
    rs = np.array([r for _, r in per_q])
    slope = float(np.polyfit(qs, rs, 1)[0]) if len(qs) > 1 else 0.0
    rows.append({"q": "all", "ratio_slope": slope, "variant": "trend"})
    return VerificationReport.build(
        "smoothing_linf", {"alpha": a, "tolerance": tolerance, "slope_max": slope_max,
                           "rho": [float(r) for r in rhos]}, rows,
        [Constraint("ratio", upper=tolerance), Constraint("lip_ratio", upper=tolerance),
         Constraint("ratio_slope", upper=slope_max)],
        {"ratio_slope": slope}, _traj_provenance(traj))


def check_besov_smoothing(traj: Trajectory, s: float, p: float = 2.0, alpha: Optional[float] = None,
                          tolerance: float = 20.0,
                          partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """||theta||_{L~inf_t B^s_{p,1}} + ||theta||_{L^1_t B^{s+a}_{p,1}} against
    e^{V(t)} (||theta0||_{B^s_{p,1}} (1+t) + ||f||_{L^1_t B^s_{p,1}} + int Gamma_s),
    where Gamma_s = ||grad theta||_inf ||v||_{B^s_{p,1}} only when s >= 1."""
    if not s > -1:
        raise ValueError(f"regularity index must exceed -1, got {s}")
    a = _alpha_of(traj, alpha)
    t = traj.times
    B = _block_series(traj.theta, p, partition)
    qs = np.arange(-1, B.shape[0] - 1)
    ws, wsa = 2.0 ** (qs * s), 2.0 ** (qs * (s + a))
    lhs = (ws[:, None] * np.maximum.accumulate(B, axis=1)).sum(0) + (wsa[:, None] * _cumtrapz(B, t)).sum(0)
    idx = BesovIndex(s, p, 1)
    theta0 = float(np.sum(ws * B[:, 0]))
    fB = _cumtrapz(np.array([_besov(traj.forcing_at(i), idx, partition) for i in range(len(traj))]), t)
    with_gamma = s >= 1
    if with_gamma:
        gam = np.array([st.grad_theta_linf * _besov(traj.velocity(i), idx, partition)
                        for i, st in enumerate(traj.states)])
        G = _cumtrapz(gam, t)
    else:
        G = np.zeros_like(t)
    V = np.array([st.V_accum for st in traj.states])
    rhs = np.exp(V) * (theta0 * (1 + t) + fB + G)
    floor = 1e-12 * max(theta0, 1e-300)
    rows = [{"t": t[i], "lhs": lhs[i], "rhs": rhs[i], "ratio": safe_ratio(lhs[i], rhs[i], floor)}
            for i in range(len(t))]
    notes = ["Gamma term included" if with_gamma else "Gamma term absent (s < 1)"]
    return VerificationReport.build(
        "besov_smoothing", {"alpha": a, "s": s, "p": p, "tolerance": tolerance}, rows,
        [Constraint("ratio", upper=tolerance)], {"gamma_included": with_gamma},
        _traj_provenance(traj), notes)


_TOWERS = {
    1: lambda x: x,
    2: lambda x: np.exp(x),
    3: lambda x: np.exp(np.exp(x)),
}


def envelope(C: float, t: np.ndarray, level: int) -> np.ndarray:
    """C e^{Ct}, C e^{e^{Ct}} or C e^{e^{e^{Ct}}} for level 1, 2, 3."""
    with np.errstate(over="ignore"):
        return C * np.exp(_TOWERS[level](C * np.asarray(t, dtype=float)))


def minimal_envelope_constant(t: np.ndarray, g: np.ndarray, level: int, c_cap: float = 1e6) -> float:
    """Smallest C > 0 with g(t_i) <= envelope(C, t_i, level) at every sample."""
    tower = _TOWERS[level]
    best = 0.0
    for ti, gi in zip(np.asarray(t, float), np.asarray(g, float)):
        if not math.isfinite(gi):
            return math.inf
        if gi <= 0:
            continue
        lg = math.log(gi)

        def phi(c):
            with np.errstate(over="ignore"):
                return math.log(c) + float(tower(c * ti)) - lg

        lo = 1e-300
        if phi(max(best, lo)) >= 0:
            continue
        hi = max(best, 1.0)
        while phi(hi) < 0:
            hi *= 2.0
            if hi > c_cap:
                return math.inf
        best = brentq(phi, max(best, lo), hi, xtol=1e-14, rtol=1e-12)
    return best


def track_apriori_cascade(traj: Trajectory, p: float = 2.0, rho: float = 2.0, c0_max: float = 50.0,
                          theta_tol: float = 5e-3,
                          partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """Time series of the quantities in the a priori bounds and their envelopes.

    group 1: ||omega||_inf + ||omega||_p + ||grad theta||_{L^1_t L^inf}   vs C e^{Ct}
    group 2: ||omega||_{L~inf_t B^0_{inf,1}} + ||grad v||_inf             vs C e^{e^{Ct}}
    group 3: ||theta||_{L~rho_t B^{a/rho}_{inf,inf}} + ||theta||_{L^1_t B^{1+2/p}_{p,1}}
             + ||v||_{L^inf_t B^{1+2/p}_{p,1}}                            vs C e^{e^{e^{Ct}}}
    C0 is the minimal constant for group 1; ||grad v||_inf and the
    higher groups are then compared with envelopes using that same C0.
    """
    if traj.kind != "boussinesq":
        raise ValueError("the cascade is tracked on Boussinesq trajectories")
    if len(traj) < 10:
        raise ValueError(f"trajectory too short ({len(traj)} snapshots, need >= 10)")
    a = _alpha_of(traj, None)
    t = traj.times
    st = traj.states
    th_inf = np.array([lp_norm(s.theta, np.inf) for s in st])
    w_inf = np.array([lp_norm(s.omega, np.inf) for s in st])
    w_p = np.array([lp_norm(s.omega, p) for s in st])
    lip = np.array([s.lip_theta_accum for s in st])
    gradv = np.array([s.grad_v_linf for s in st])
    g1 = w_inf + w_p + lip

    Bw = _block_series(traj.omega, math.inf, partition)
    w_b0 = np.maximum.accumulate(Bw, axis=1).sum(0)
    g2 = w_b0 + gradv

    qs = np.arange(-1, Bw.shape[0] - 1)
    Bt_inf = _block_series(traj.theta, math.inf, partition)
    th_cl = (2.0 ** (qs * a / rho))[:, None] * _cum_time_norm(Bt_inf, t, rho)
    th_cl = th_cl.max(0)
    sp = 1.0 + 2.0 / p
    Bt_p = _block_series(traj.theta, p, partition)
    th_l1 = ((2.0 ** (qs * sp))[:, None] * _cumtrapz(Bt_p, t)).sum(0)
    v_b = np.maximum.accumulate(np.array([_besov(traj.velocity(i), BesovIndex(sp, p, 1), partition)
                                          for i in range(len(traj))]))
    g3 = th_cl + th_l1 + v_b

    C0 = minimal_envelope_constant(t, g1, 1)
    C2 = minimal_envelope_constant(t, g2, 2)
    C3 = minimal_envelope_constant(t, g3, 3)
    ok = g1 > 0
    growth = float(np.polyfit(t[ok], np.log(g1[ok]), 1)[0]) if ok.sum() > 1 else 0.0
    if math.isfinite(C0):
        e1, e2, e3 = envelope(C0, t, 1), envelope(C0, t, 2), envelope(C0, t, 3)
    else:
        e1 = e2 = e3 = np.full_like(t, math.inf)
    rows = []
    for i in range(len(t)):
        order_gap = max(0.0, e1[i] - e2[i], e2[i] - e3[i]) if np.isfinite(e3[i]) else 0.0
        rows.append({
            "t": t[i], "theta_linf": th_inf[i], "omega_linf": w_inf[i], "omega_lp": w_p[i],
            "grad_theta_l1linf": lip[i], "omega_b0_cl": w_b0[i], "grad_v_linf": gradv[i],
            "theta_cl": th_cl[i], "theta_l1b": th_l1[i], "v_besov": v_b[i],
            "group1": g1[i], "group2": g2[i], "group3": g3[i],
            "theta_linf_ratio": th_inf[i] / max(th_inf[0], 1e-300),
            "gradv_envelope_ratio": safe_ratio(gradv[i], e2[i]),
            "group2_envelope_ratio": safe_ratio(g2[i], e2[i]),
            "group3_envelope_ratio": safe_ratio(g3[i], e3[i]),
            "ordering_gap": order_gap,
        })
    rows[0]["C0"] = C0
    fitted = {"C0": C0, "C_double": C2, "C_triple": C3, "growth_rate": growth}
    constraints = [Constraint("C0", upper=c0_max), Constraint("gradv_envelope_ratio", upper=1.0),
                   Constraint("theta_linf_ratio", upper=1 + theta_tol),
                   Constraint("ordering_gap", upper=0.0)]
    return VerificationReport.build(
        "apriori_cascade", {"p": p, "rho": rho, "c0_max": c0_max, "alpha": a}, rows, constraints,
        fitted, _traj_provenance(traj, source=traj.source.name if traj.source else None),
        stats=("group2_envelope_ratio", "group3_envelope_ratio"))


def check_transport_besov(traj: Trajectory, idx: BesovIndex = BesovIndex(0.0, 2.0, 2.0),
                          tolerance: float = 20.0,
                          partition: DyadicPartition = DEFAULT_PARTITION) -> VerificationReport:
    """Transport runs: ||a||_{L~inf_t B^0_{p,r}} against
    (||a0||_{B^0_{p,r}} + ||f||_{L~1_t B^0_{p,r}})(1 + V(t)).
    Boussinesq runs: ||v(t)||_{B^s_{p,r}} against
    e^{V(t)} (||v0||_{B^s_{p,r}} + int_0^t e^{-V} ||F(theta)||_{B^s_{p,r}})."""
    t = traj.times
    V = np.array([s.V_accum for s in traj.states])
    r = float(idx.r)
    rows = []
    notes = []

    def lr(x, axis=0):
        return x.max(axis) if math.isinf(r) else (x ** r).sum(axis) ** (1.0 / r)

    if traj.kind == "transport":
        if idx.s != 0:
            raise ValueError("the transport bound is stated in B^0_{p,r}")
        if traj.alpha is not None:
            notes.append("dissipative run: the transport bound is applied as is")
        A = _block_series(traj.theta, idx.p, partition)
        lhs = lr(np.maximum.accumulate(A, axis=1))
        Fb = _block_series([traj.forcing_at(i) for i in range(len(traj))], idx.p, partition)
        f_cl = lr(_cumtrapz(Fb, t))
        rhs = (lr(A[:, 0]) + f_cl) * (1.0 + V)
        name = "transport_besov"
    else:
        if not idx.s > -1:
            raise ValueError("velocity persistence needs s > -1")
        vel = [traj.velocity(i) for i in range(len(traj))]
        lhs = np.array([_besov(v, idx, partition) for v in vel])
        F = traj.source
        fn = []
        for s_ in traj.states:
            if F is None:
                fn.append(0.0)
                continue
            vals = s_.theta.physical()
            fn.append(_besov(VectorField.from_physical(traj.grid, *F.evaluate(vals)), idx, partition))
        integrand = np.exp(-V) * np.array(fn)
        rhs = np.exp(V) * (lhs[0] + _cumtrapz(integrand, t))
        name = "velocity_persistence"
    floor = 1e-12 * max(float(np.max(np.abs(rhs))), 1e-300)
    for i in range(len(t)):
        rows.append({"t": t[i], "lhs": lhs[i], "rhs": rhs[i], "ratio": safe_ratio(lhs[i], rhs[i], floor)})
    return VerificationReport.build(
        name, {"s": idx.s, "p": idx.p, "r": idx.r, "tolerance": tolerance}, rows,
        [Constraint("ratio", upper=tolerance)], {}, _traj_provenance(traj), notes)


def check_twin_stability(full: StabilityReport, half: StabilityReport, t_probe: float = 0.25,
                         ratio_bounds=(1.8, 2.2)) -> VerificationReport:
    """Linear response of delta0 and delta0/2 perturbations plus the Gronwall fit."""
    cmp = compare_twin_responses(full, half, t_probe)
    rows = [{"t": full.times[i], "response_full": full.velocity_diff[i] + full.theta_diff[i],
             "response_half": half.velocity_diff[i] + half.theta_diff[i],
             "envelope": full.fit_envelope()[i]} for i in range(len(full.times))]
    rows[0].update({"response_ratio": cmp["ratio"],
                    "outside_envelope": 0.0 if (cmp["within_full"] and cmp["within_half"]) else 1.0,
                    "gronwall_C": max(full.gronwall_C, half.gronwall_C)})
    lo, hi = ratio_bounds
    return VerificationReport.build(
        "twin_stability", {"t_probe": t_probe, "ratio_bounds": list(ratio_bounds), "p": full.p}, rows,
        [Constraint("response_ratio", lower=lo, upper=hi), Constraint("outside_envelope", upper=0.0),
         Constraint("gronwall_C", upper=full.c_max)],
        {"A": full.fit_A, "B": full.fit_B, "gronwall_C_full": full.gronwall_C,
         "gronwall_C_half": half.gronwall_C, "delta0": full.delta0}, {"p": full.p})


# ---------------------------------------------------------------------------
# dispatch

@dataclass(frozen=True)
class CheckSpec:
    """Ensemble check request: check name, ensemble and keyword parameters."""

    name: str
    ensemble: EnsembleSpec = EnsembleSpec()
    params: dict = field(default_factory=dict)
    tolerance: Optional[float] = None

    def __post_init__(self):
        if self.name not in _ENSEMBLE_CHECKS:
            raise ValueError(f"unknown check {self.name!r}; choose from {sorted(_ENSEMBLE_CHECKS)}")
        qr = self.params.get("q_range") or self.params.get("j_range")
        if qr is not None:
            _q_list(self.ensemble.grid, qr, DEFAULT_PARTITION)


_ENSEMBLE_CHECKS = {
    "generalized_bernstein": (check_generalized_bernstein, "tolerance"),
    "positivity_corollary": (check_positivity_corollary, "tolerance"),
    "semigroup_decay": (check_semigroup_decay, "C_max"),
    "bernstein_sandwich": (check_bernstein_sandwich, "C_max"),
    "almost_orthogonality": (check_almost_orthogonality, "tolerance"),
}


def run_check(spec: CheckSpec) -> VerificationReport:
    fn, tol_name = _ENSEMBLE_CHECKS[spec.name]
    kwargs = dict(spec.params)
    if spec.tolerance is not None:
        kwargs[tol_name] = spec.tolerance
    return fn(spec.ensemble, **kwargs)
