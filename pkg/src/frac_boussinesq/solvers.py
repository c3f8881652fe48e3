"""Integrating-factor RK4 solvers for transport-diffusion and the Boussinesq system.

Both solvers share one time loop (:func:`_integrate`).  The diagonal part
``|D|^alpha`` is treated exactly through the factors ``exp(-dt |k|^alpha)``;
advection and buoyancy are evaluated pseudo-spectrally with 2/3 dealiasing.

Accumulators carried along the run:

* ``V_accum``         trapezoid integral of ||grad v||_inf over accepted steps
* ``lip_theta_accum`` trapezoid integral of ||grad theta||_inf
* ``dissipation``     integral of || |D|^{alpha/2} theta ||_2^2, computed with
  exponentially weighted Simpson weights so that the L^2 energy identity
  closes to round-off when v = 0 and to high order otherwise.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Sequence, Union

import numpy as np

from .littlewood_paley import BesovIndex, besov_norm
from .spectral import (
    Grid,
    SpectralField,
    VectorField,
    as_order,
    biot_savart,
    curl,
    dealias,
    fft2,
    ifft2,
    lp_norm,
)
from .sources import PolynomialMap, SourceFunction

__all__ = [
    "SolverAbort",
    "CFLViolation",
    "NonFiniteState",
    "SourceOverflow",
    "IntegratorConfig",
    "SolverState",
    "Trajectory",
    "solve_transport_diffusion",
    "solve_boussinesq",
    "evaluate_source",
    "twin_run_stability",
    "StabilityReport",
    "compare_twin_responses",
    "richardson_order",
    "velocity_gradient_linf",
    "kinetic_energy",
]


class SolverAbort(RuntimeError):
    """A run stopped for numerical reasons; ``t`` is the last accepted time."""

    def __init__(self, message: str, t: float = float("nan")):
        super().__init__(message)
        self.t = t


class CFLViolation(SolverAbort):
    pass


class NonFiniteState(SolverAbort):
    pass


class SourceOverflow(SolverAbort):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    dt: float = 1e-2
    t_end: float = 1.0
    cfl_safety: float = 0.5
    snapshot_stride: int = 1
    scheme: str = "IFRK4"
    min_dt: float = 1e-9
    max_principle_tol: float = 5e-3

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_end > 0:
            raise ValueError(f"t_end must be positive, got {self.t_end}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if int(self.snapshot_stride) != self.snapshot_stride or self.snapshot_stride < 1:
            raise ValueError(f"snapshot_stride must be a positive integer, got {self.snapshot_stride}")
        if self.scheme.upper() != "IFRK4":
            raise ValueError(f"unsupported scheme {self.scheme!r}; only IFRK4 is available")


@dataclass(frozen=True, eq=False)
class SolverState:
    omega: SpectralField
    theta: SpectralField
    t: float
    V_accum: float = 0.0
    lip_theta_accum: float = 0.0
    dissipation: float = 0.0
    grad_v_linf: float = 0.0
    grad_theta_linf: float = 0.0
    step: int = 0


@dataclass(eq=False)
class Trajectory:
    """Snapshots of one run plus what is needed to re-derive its inputs."""

    grid: Grid
    alpha: Optional[float]
    kind: str
    config: IntegratorConfig
    states: List[SolverState]
    velocities: Optional[List[VectorField]] = None
    forcing: Optional[List[Optional[SpectralField]]] = None
    source: Optional[SourceFunction] = None
    step_times: List[float] = field(default_factory=list)
    flags: List[str] = field(default_factory=list)

    def __len__(self):
        return len(self.states)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def theta(self) -> List[SpectralField]:
        return [s.theta for s in self.states]

    @property
    def omega(self) -> List[SpectralField]:
        return [s.omega for s in self.states]

    @property
    def has_forcing(self) -> bool:
        return self.forcing is not None and any(f is not None for f in self.forcing)

    def velocity(self, i: int) -> VectorField:
        if self.velocities is not None:
            return self.velocities[i]
        return biot_savart(self.states[i].omega)

    def forcing_at(self, i: int) -> SpectralField:
        if self.forcing is None or self.forcing[i] is None:
            return SpectralField.zeros(self.grid)
        return self.forcing[i]

    @property
    def final(self) -> SolverState:
        return self.states[-1]


# ---------------------------------------------------------------------------
# shared helpers

def _phys_grad(c: np.ndarray, g: Grid):
    return ifft2(1j * g.dk1 * c), ifft2(1j * g.dk2 * c)


def _jacobian_linf(a11, a12, a21, a22) -> float:
    return float(np.sqrt(np.max(a11**2 + a12**2 + a21**2 + a22**2)))


def velocity_gradient_linf(v: VectorField) -> float:
    """max_x of the Frobenius norm of grad v at collocation points."""
    g = v.grid
    a11, a12 = _phys_grad(v.u1.coeffs, g)
    a21, a22 = _phys_grad(v.u2.coeffs, g)
    return _jacobian_linf(a11, a12, a21, a22)


def kinetic_energy(v: VectorField) -> float:
    return 0.5 * lp_norm(v, 2) ** 2


def _grad_linf(c: np.ndarray, g: Grid) -> float:
    gx, gy = _phys_grad(c, g)
    return float(np.sqrt(np.max(gx * gx + gy * gy)))


def _exp_moments(a: np.ndarray):
    """M_j = int_0^1 a e^{-a s} s^j ds for j = 0, 1, 2 (series for small a)."""
    a = np.asarray(a, dtype=float)
    small = a < 0.1
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        e = np.exp(-a)
        m0 = -np.expm1(-a)
        m1 = -e + m0 / a
        m2 = -e + 2.0 * m1 / a
    if np.any(small):
        s = a[small]
        t0 = np.zeros_like(s)
        t1 = np.zeros_like(s)
        t2 = np.zeros_like(s)
        term = np.ones_like(s)
        for m in range(14):
            t0 += term / (m + 1)
            t1 += term / (m + 2)
            t2 += term / (m + 3)
            term = term * (-s) / (m + 1)
        m0[small], m1[small], m2[small] = s * t0, s * t1, s * t2
    return m0, m1, m2


class _DissipationQuadrature:
    """Per-mode weights for int_0^h 2 lam |theta_k(s)|^2 ds from three samples.

    With a = 2 lam h, weakly damped modes (a <= 1) write
    |theta_k(s)|^2 = e^{-2 lam s} P(s) with P quadratic through the start,
    midpoint and end of the step, and integrate the exponential exactly.
    Strongly damped modes fit A e^{-2 lam s} + B + C s instead, which
    tolerates a quasi-steady forced balance without amplifying round-off.
    Both forms are exact for pure diagonal decay.
    """

    def __init__(self, lam: np.ndarray, h: float):
        a = 2.0 * lam * h
        weak = a <= 1.0
        m0, m1, m2 = _exp_moments(np.where(weak, a, 0.0))
        ea = np.exp(np.where(weak, 0.5 * a, 0.0))
        w0_weak = 2 * m2 - 3 * m1 + m0
        wm_weak = (-4 * m2 + 4 * m1) * ea
        w1_weak = (2 * m2 - m1) * ea * ea
        E = np.exp(-0.5 * np.where(weak, 1.0, a))
        D = (1.0 - E) ** 2
        K = (1.0 - E * E) * (1.0 + 0.5 * a) - a
        w_end = K / D + 0.5 * a
        self.w0 = np.where(weak, w0_weak, w_end)
        self.wm = np.where(weak, wm_weak, -2.0 * K / D)
        self.w1 = np.where(weak, w1_weak, w_end)

    def __call__(self, y0, ymid, y1) -> np.ndarray:
        return self.w0 * y0 + self.wm * ymid + self.w1 * y1


class _StepFactors:
    def __init__(self, lams: Sequence[Optional[np.ndarray]], h: float, dissip_index: Optional[int]):
        self.h = h
        self.full = [None if l is None else np.exp(-l * h) for l in lams]
        self.half = [None if l is None else np.exp(-l * h / 2) for l in lams]
        self.quad = None
        if dissip_index is not None and lams[dissip_index] is not None:
            self.quad = _DissipationQuadrature(lams[dissip_index], h)


def _apply(E, x):
    return x if E is None else E * x


def _ifrk4_step(u, t, h, rhs, fac: _StepFactors):
    E, Eh = fac.full, fac.half
    k1 = rhs(u, t)
    u2 = [_apply(e, ui + 0.5 * h * ki) for e, ui, ki in zip(Eh, u, k1)]
    k2 = rhs(u2, t + 0.5 * h)
    u3 = [_apply(e, ui) + 0.5 * h * ki for e, ui, ki in zip(Eh, u, k2)]
    k3 = rhs(u3, t + 0.5 * h)
    u4 = [_apply(e, ui) + h * _apply(eh, ki) for e, eh, ui, ki in zip(E, Eh, u, k3)]
    k4 = rhs(u4, t + h)
    new = [
        _apply(e, ui) + (h / 6.0) * (_apply(e, a) + 2.0 * _apply(eh, b + c) + d)
        for e, eh, ui, a, b, c, d in zip(E, Eh, u, k1, k2, k3, k4)
    ]
    return new, (u2, u3)


class _Problem:
    """Right-hand side and diagnostics for one PDE; subclasses fill in the physics."""

    grid: Grid
    lams: List[Optional[np.ndarray]]
    theta_index: int

    def rhs(self, u, t):
        raise NotImplementedError

    def max_speed(self, u, t) -> float:
        raise NotImplementedError

    def grad_v_linf(self, u, t) -> float:
        raise NotImplementedError

    def snapshot_extras(self, u, t):
        return None

    def omega_at(self, u, t) -> np.ndarray:
        raise NotImplementedError


def _integrate(problem: _Problem, u0, cfg: IntegratorConfig, alpha, schedule=None):
    g = problem.grid
    ti = problem.theta_index
    lam_theta = problem.lams[ti]
    u = [np.array(x) for x in u0]
    t = 0.0
    V = lip = diss = 0.0
    gv = problem.grad_v_linf(u, t)
    gt = _grad_linf(u[ti], g)
    extras = []

    def snap(step):
        st = SolverState(
            omega=SpectralField(g, problem.omega_at(u, t)),
            theta=SpectralField(g, u[ti]),
            t=t, V_accum=V, lip_theta_accum=lip, dissipation=diss,
            grad_v_linf=gv, grad_theta_linf=gt, step=step,
        )
        extras.append(problem.snapshot_extras(u, t))
        return st

    states = [snap(0)]
    step_times = []
    factors = None
    step = 0
    while True:
        remaining = cfg.t_end - t
        if schedule is not None:
            if step >= len(schedule):
                break
            target = float(schedule[step])
        elif remaining <= 1e-14 * max(1.0, cfg.t_end):
            break
        speed = problem.max_speed(u, t)
        dt_cfl = cfg.cfl_safety * g.dx / max(1.0, speed)
        if schedule is not None:
            h = target - t
            if h > dt_cfl * (1 + 1e-9):
                raise CFLViolation(
                    f"prescribed step {h:.3e} exceeds CFL limit {dt_cfl:.3e} at t={t:.6g}", t)
            final = step == len(schedule) - 1
        else:
            h = min(cfg.dt, dt_cfl)
            final = remaining <= h * (1 + 1e-12)
            if final:
                h = remaining
            elif h < cfg.min_dt:
                raise CFLViolation(
                    f"CFL step {h:.3e} fell below min_dt {cfg.min_dt:.1e} at t={t:.6g} "
                    f"(max speed {speed:.3e})", t)
        if factors is None or factors.h != h:
            factors = _StepFactors(problem.lams, h, ti if lam_theta is not None else None)
        u_new, (u2, u3) = _ifrk4_step(u, t, h, problem.rhs, factors)
        if not all(np.all(np.isfinite(x)) for x in u_new):
            raise NonFiniteState(f"non-finite values after step at t={t:.6g}, dt={h:.3e}", t)
        if factors.quad is not None:
            y0 = np.abs(u[ti]) ** 2
            ym = 0.5 * (np.abs(u2[ti]) ** 2 + np.abs(u3[ti]) ** 2)
            y1 = np.abs(u_new[ti]) ** 2
            diss += 0.5 * g.box_length**2 * float(np.sum(factors.quad(y0, ym, y1)))
        u = u_new
        t_new = (target if schedule is not None else (cfg.t_end if final else t + h))
        gv_new = problem.grad_v_linf(u, t_new)
        gt_new = _grad_linf(u[ti], g)
        V += 0.5 * h * (gv + gv_new)
        lip += 0.5 * h * (gt + gt_new)
        gv, gt, t = gv_new, gt_new, t_new
        step += 1
        step_times.append(t)
        if step % cfg.snapshot_stride == 0 or final:
            states.append(snap(step))
        if final and schedule is None:
            break
    return states, extras, step_times


# ---------------------------------------------------------------------------
# transport-diffusion

VelocityProvider = Union[VectorField, Callable[[float], VectorField]]
ForcingProvider = Union[None, SpectralField, Callable[[float], Optional[SpectralField]]]


class _TransportProblem(_Problem):
    def __init__(self, grid, alpha, velocity: VelocityProvider, forcing: ForcingProvider):
        self.grid = grid
        self.lams = [None if alpha is None else grid.kmag ** alpha]
        self.theta_index = 0
        self._velocity = velocity
        self._forcing = forcing
        self._vcache = {}
        self._fcache = {}

    def _field(self, t):
        if t in self._vcache:
            return self._vcache[t]
        v = self._velocity(t) if callable(self._velocity) else self._velocity
        if not isinstance(v, VectorField) or v.grid != self.grid:
            raise ValueError("velocity provider must return a VectorField on the solver grid")
        defect = v.divergence_defect()
        if defect > 1e-10:
            raise ValueError(f"velocity at t={t:.6g} is not divergence free (defect {defect:.3e})")
        v1, v2 = v.physical()
        entry = (v, v1, v2)
        if len(self._vcache) > 8:
            self._vcache.clear()
        self._vcache[t] = entry
        return entry

    def _force(self, t) -> Optional[SpectralField]:
        f = self._forcing
        if f is None:
            return None
        if t in self._fcache:
            return self._fcache[t]
        val = f(t) if callable(f) else f
        if val is not None:
            if val.grid != self.grid:
                raise ValueError("forcing lives on a different grid")
            val = dealias(val)
        if len(self._fcache) > 8:
            self._fcache.clear()
        self._fcache[t] = val
        return val

    def rhs(self, u, t):
        g = self.grid
        _, v1, v2 = self._field(t)
        tx, ty = _phys_grad(u[0], g)
        out = -fft2(v1 * tx + v2 * ty)
        f = self._force(t)
        if f is not None:
            out = out + f.coeffs
        return [np.where(g.dealias_mask, out, 0.0)]

    def max_speed(self, u, t):
        _, v1, v2 = self._field(t)
        return float(np.sqrt(np.max(v1 * v1 + v2 * v2)))

    def grad_v_linf(self, u, t):
        return velocity_gradient_linf(self._field(t)[0])

    def omega_at(self, u, t):
        return np.array(curl(self._field(t)[0]).coeffs)

    def snapshot_extras(self, u, t):
        return (self._field(t)[0], self._force(t))


def _check_theta0(theta0: SpectralField, flags: List[str]) -> np.ndarray:
    if not theta0.real_flag:
        raise ValueError("initial temperature must be a real field")
    c = np.array(dealias(theta0).coeffs)
    scale = max(np.max(np.abs(c)), 1e-300)
    if abs(c[0, 0]) > 1e-12 * scale:
        flags.append("theta_nonzero_mean")
    return c


def solve_transport_diffusion(theta0: SpectralField, velocity_provider: VelocityProvider,
                              forcing_provider: ForcingProvider = None,
                              alpha: Optional[float] = 1.5,
                              cfg: IntegratorConfig = IntegratorConfig(),
                              schedule: Optional[Sequence[float]] = None) -> Trajectory:
    """Advance d_t theta + v.grad theta + |D|^alpha theta = f.

    ``velocity_provider`` is a divergence-free :class:`VectorField` or a
    callable ``t -> VectorField``; ``forcing_provider`` likewise for f (or
    None).  ``alpha=None`` switches dissipation off (pure transport).
    ``schedule`` optionally fixes the step end times; CFL is then checked
    rather than enforced.
    """
    grid = theta0.grid
    a = None if alpha is None else as_order(alpha).alpha
    flags: List[str] = []
    c0 = _check_theta0(theta0, flags)
    problem = _TransportProblem(grid, a, velocity_provider, forcing_provider)
    states, extras, step_times = _integrate(problem, [c0], cfg, a, schedule)
    traj = Trajectory(
        grid=grid, alpha=a, kind="transport", config=cfg, states=states,
        velocities=[e[0] for e in extras], forcing=[e[1] for e in extras],
        step_times=step_times, flags=flags,
    )
    _flag_max_principle(traj, cfg)
    return traj


def _flag_max_principle(traj: Trajectory, cfg: IntegratorConfig):
    if traj.has_forcing:
        return
    ref = lp_norm(traj.states[0].theta, np.inf)
    if ref == 0:
        return
    worst = max(lp_norm(s.theta, np.inf) for s in traj.states) / ref
    if worst > 1 + cfg.max_principle_tol:
        traj.flags.append(f"max_principle_overshoot:{worst - 1:.3e}")


# ---------------------------------------------------------------------------
# Boussinesq

def _is_zero_map(m) -> bool:
    return isinstance(m, PolynomialMap) and all(c == 0.0 for c in m.coeffs)


def _source_coeffs(theta_phys: np.ndarray, F: SourceFunction, g: Grid) -> np.ndarray:
    out = np.zeros((g.n, g.n), dtype=np.complex128)
    try:
        with np.errstate(over="raise", invalid="raise"):
            if not _is_zero_map(F.F2):
                out += 1j * g.dk1 * fft2(F.F2(theta_phys))
            if not _is_zero_map(F.F1):
                out -= 1j * g.dk2 * fft2(F.F1(theta_phys))
    except FloatingPointError as exc:
        raise SourceOverflow(f"source evaluation overflowed: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SourceOverflow("source evaluation produced non-finite values")
    return np.where(g.dealias_mask, out, 0.0)


def evaluate_source(theta: SpectralField, F: SourceFunction) -> SpectralField:
    """d1 F2(theta) - d2 F1(theta): pointwise F, spectral derivatives, dealiased."""
    if not theta.real_flag:
        raise ValueError("temperature must be a real field")
    return SpectralField(theta.grid, _source_coeffs(theta.physical(), F, theta.grid))


class _BoussinesqProblem(_Problem):
    def __init__(self, grid, alpha, F):
        self.grid = grid
        self.lams = [None, grid.kmag ** alpha]
        self.theta_index = 1
        self.F = F

    def _velocity(self, w):
        g = self.grid
        psi = -w * g.inv_kmag2
        return ifft2(-1j * g.dk2 * psi), ifft2(1j * g.dk1 * psi), psi

    def rhs(self, u, t):
        g = self.grid
        w, th = u
        v1, v2, _ = self._velocity(w)
        wx, wy = _phys_grad(w, g)
        tx, ty = _phys_grad(th, g)
        nw = -fft2(v1 * wx + v2 * wy) + _source_coeffs(ifft2(th), self.F, g)
        nt = -fft2(v1 * tx + v2 * ty)
        nw = np.where(g.dealias_mask, nw, 0.0)
        nw[0, 0] = 0.0
        return [nw, np.where(g.dealias_mask, nt, 0.0)]

    def max_speed(self, u, t):
        v1, v2, _ = self._velocity(u[0])
        return float(np.sqrt(np.max(v1 * v1 + v2 * v2)))

    def grad_v_linf(self, u, t):
        g = self.grid
        _, _, psi = self._velocity(u[0])
        # grad v with v = (-d2 psi, d1 psi)
        a11 = ifft2(g.dk1 * g.dk2 * psi)
        a12 = ifft2(g.dk2 * g.dk2 * psi)
        a21 = ifft2(-g.dk1 * g.dk1 * psi)
        return _jacobian_linf(a11, a12, a21, -a11)

    def omega_at(self, u, t):
        return u[0]


def solve_boussinesq(omega0: SpectralField, theta0: SpectralField, F: SourceFunction,
                     alpha: float = 1.5, cfg: IntegratorConfig = IntegratorConfig(),
                     schedule: Optional[Sequence[float]] = None) -> Trajectory:
    """Vorticity-temperature Boussinesq system with fractional dissipation on theta."""
    if omega0.grid != theta0.grid:
        raise ValueError("vorticity and temperature live on different grids")
    if not omega0.real_flag:
        raise ValueError("initial vorticity must be a real field")
    grid = theta0.grid
    a = as_order(alpha).alpha
    w0 = np.array(dealias(omega0).coeffs)
    scale = max(np.max(np.abs(w0)), 1.0)
    if abs(w0[0, 0]) > 1e-10 * scale:
        raise ValueError(f"initial vorticity has nonzero mean {w0[0, 0].real:.3e}")
    w0[0, 0] = 0.0
    flags: List[str] = []
    c0 = _check_theta0(theta0, flags)
    problem = _BoussinesqProblem(grid, a, F)
    states, _, step_times = _integrate(problem, [w0, c0], cfg, a, schedule)
    traj = Trajectory(grid=grid, alpha=a, kind="boussinesq", config=cfg, states=states,
                      source=F, step_times=step_times, flags=flags)
    _flag_max_principle(traj, cfg)
    return traj


# ---------------------------------------------------------------------------
# twin runs

@dataclass
class StabilityReport:
    """Difference of two Boussinesq runs against Gronwall-type envelopes."""

    p: float
    times: np.ndarray
    delta0: float
    velocity_diff: np.ndarray
    theta_diff: np.ndarray
    theta_diff_l1t: np.ndarray
    V1: np.ndarray
    V2: np.ndarray
    lip_theta1: np.ndarray
    envelope_source: np.ndarray
    gronwall_C: float
    fit_A: float
    fit_B: float
    c_max: float = 20.0

    @property
    def within_gronwall(self) -> bool:
        return math.isfinite(self.gronwall_C) and self.gronwall_C <= self.c_max

    def gronwall_envelope(self, C: Optional[float] = None) -> np.ndarray:
        C = self.gronwall_C if C is None else C
        return self.envelope_source * np.exp(C * (self.V1 + self.V2) + self.times * self.lip_theta1)

    def fit_envelope(self, delta0: Optional[float] = None) -> np.ndarray:
        d = self.delta0 if delta0 is None else delta0
        return self.fit_A * np.exp(self.fit_B * self.times) * d

    def response_at(self, t: float) -> float:
        """Velocity plus temperature difference (L^p) interpolated at time t."""
        total = self.velocity_diff + self.theta_diff
        return float(np.interp(t, self.times, total))

    def to_dict(self) -> dict:
        return {
            "p": self.p, "delta0": self.delta0, "gronwall_C": self.gronwall_C,
            "fit_A": self.fit_A, "fit_B": self.fit_B, "within_gronwall": self.within_gronwall,
        }


def _cumtrapz(y, t):
    out = np.zeros_like(y, dtype=float)
    if len(y) > 1:
        out[1:] = np.cumsum(0.5 * np.diff(t) * (y[1:] + y[:-1]))
    return out


def _min_gronwall_constant(values, base, growth):
    """Smallest C >= 0 with values <= base * exp(C * growth) pointwise."""
    C = 0.0
    for val, b, w in zip(values, base, growth):
        if val <= b * (1 + 1e-12):
            continue
        if b <= 0 or w <= 0:
            return math.inf
        C = max(C, math.log(val / b) / w)
    return C


def twin_run_stability(run1_init, run2_init, F: SourceFunction, alpha: float,
                       cfg: IntegratorConfig, p: float = 2.0, c_max: float = 20.0,
                       base_run: Optional[Trajectory] = None) -> StabilityReport:
    """Run two Boussinesq solutions on a shared step schedule and compare them.

    ``run*_init`` are ``(omega0, theta0)`` pairs.  ``base_run`` may supply an
    already computed trajectory for ``run1_init`` (it must use stride 1).
    """
    (w1, t1), (w2, t2) = run1_init, run2_init
    grids = {w1.grid, t1.grid, w2.grid, t2.grid}
    if len(grids) != 1:
        raise ValueError("twin runs require all initial data on the same grid")
    cfg1 = replace(cfg, snapshot_stride=1)
    traj1 = base_run if base_run is not None else solve_boussinesq(w1, t1, F, alpha, cfg1)
    traj2 = solve_boussinesq(w2, t2, F, alpha, cfg1, schedule=traj1.step_times)
    grid = t1.grid
    times = traj1.times
    vd, td = [], []
    for s1, s2 in zip(traj1.states, traj2.states):
        vd.append(lp_norm(biot_savart(s2.omega - s1.omega), p))
        td.append(lp_norm(s2.theta - s1.theta, p))
    vd, td = np.array(vd), np.array(td)
    dth0 = dealias(t2) - dealias(t1)
    a = as_order(alpha).alpha
    dv0 = vd[0]
    delta0 = dv0 + besov_norm(dth0, BesovIndex(-a + 1 + 2 / p, p, 1)) + lp_norm(dth0, np.inf)
    V1 = np.array([s.V_accum for s in traj1.states])
    V2 = np.array([s.V_accum for s in traj2.states])
    lip1 = np.array([s.lip_theta_accum for s in traj1.states])
    # || grad v_2 ||_{L^1_t L^p}
    gv2 = []
    for s in traj2.states:
        v = biot_savart(s.omega)
        a11, a12 = _phys_grad(v.u1.coeffs, grid)
        a21, a22 = _phys_grad(v.u2.coeffs, grid)
        gv2.append(lp_norm(np.sqrt(a11**2 + a12**2 + a21**2 + a22**2), p, grid))
    gv2_l1 = _cumtrapz(np.array(gv2), times)
    theta_part = delta0 - dv0
    source = dv0 + theta_part * (1.0 + gv2_l1)
    growth = V1 + V2
    lip_factor = np.exp(times * lip1)
    C_v = _min_gronwall_constant(vd, source * lip_factor, growth)
    td_l1 = _cumtrapz(td, times)
    area = grid.box_length**2
    theta_base = times * (area ** (1.0 / p) * lp_norm(dth0, np.inf) + source) * lip_factor
    C_t = _min_gronwall_constant(td_l1, theta_base, growth)
    C = max(C_v, C_t)
    A, B = _fit_exponential(times, (vd + td) / delta0 if delta0 > 0 else vd + td)
    return StabilityReport(p=p, times=times, delta0=float(delta0), velocity_diff=vd, theta_diff=td,
                           theta_diff_l1t=td_l1, V1=V1, V2=V2, lip_theta1=lip1,
                           envelope_source=source, gronwall_C=C, fit_A=A, fit_B=B, c_max=c_max)


def _fit_exponential(t, y):
    """Least-squares slope B of log y, then the smallest A with y <= A e^{Bt}."""
    t = np.asarray(t, float)
    y = np.asarray(y, float)
    ok = y > 0
    if ok.sum() < 2:
        return (float(np.max(y)) if len(y) else 0.0), 0.0
    B, _ = np.polyfit(t[ok], np.log(y[ok]), 1)
    A = float(np.max(y[ok] * np.exp(-B * t[ok])))
    return A, float(B)


def compare_twin_responses(full: StabilityReport, half: StabilityReport, t_probe: float = 0.25,
                           slack: float = 1.1) -> dict:
    """Linear-response check for perturbations of size delta0 and delta0/2.

    The exponential envelope fitted on the full perturbation must also bound
    the half-size run, scaled by its own delta0.
    """
    ratio = full.response_at(t_probe) / half.response_at(t_probe)
    env_half = full.fit_envelope(half.delta0)
    within_half = bool(np.all(half.velocity_diff + half.theta_diff <= slack * env_half + 1e-300))
    env_full = full.fit_envelope()
    within_full = bool(np.all(full.velocity_diff + full.theta_diff <= env_full * (1 + 1e-12)))
    return {"ratio": ratio, "within_full": within_full, "within_half": within_half,
            "A": full.fit_A, "B": full.fit_B, "delta0_full": full.delta0,
            "delta0_half": half.delta0}


# ---------------------------------------------------------------------------
# time-order check

def richardson_order(theta0: SpectralField, velocity: VelocityProvider, alpha: Optional[float],
                     dt: float, t_end: float, forcing: ForcingProvider = None) -> dict:
    """Self-convergence order from uniform steps dt, dt/2, dt/4."""
    finals = []
    for k in range(3):
        h = dt / 2**k
        nsteps = int(round(t_end / h))
        if not math.isclose(nsteps * h, t_end, rel_tol=1e-12):
            raise ValueError("t_end must be an integer multiple of dt")
        schedule = [h * (i + 1) for i in range(nsteps)]
        cfg = IntegratorConfig(dt=h, t_end=t_end, cfl_safety=1.0, snapshot_stride=nsteps)
        traj = solve_transport_diffusion(theta0, velocity, forcing, alpha, cfg, schedule=schedule)
        finals.append(traj.final.theta)
    e1 = lp_norm(finals[0] - finals[1], 2)
    e2 = lp_norm(finals[1] - finals[2], 2)
    order = math.log2(e1 / e2) if e2 > 0 and e1 > 0 else float("nan")
    return {"order": order, "diff_coarse": e1, "diff_fine": e2}
