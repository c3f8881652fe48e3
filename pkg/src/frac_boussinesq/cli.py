"""Command-line front end: ``simulate``, ``verify`` and ``sweep``.

Exit codes: 0 success, 1 configuration error (or a failed check for
``verify``), 2 numerical abort.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import List, Optional


from . import harness as H
from .config import SUITES, ConfigError, RunConfig, load_config
from .initial_data import (
    euler_eigen,
    gaussian_bump,
    random_field,
    shear_velocity,
    single_block,
)
from .littlewood_paley import BesovIndex
from .records import format_float, write_summary_csv, write_trajectory
from .solvers import (
    IntegratorConfig,
    SolverAbort,
    Trajectory,
    solve_boussinesq,
    solve_transport_diffusion,
    twin_run_stability,
)
from .spectral import Grid, SpectralField, VectorField, biot_savart, lp_norm

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


# ---------------------------------------------------------------------------
# building runs from a config

def build_field(cfg: RunConfig, which: str, grid: Grid) -> SpectralField:
    preset = getattr(cfg, which)
    amp = getattr(cfg, f"{which}_amplitude")
    seed = cfg.seed + (0 if which == "theta0" else 1)
    if preset == "zero":
        return SpectralField.zeros(grid)
    if preset == "random":
        return random_field(grid, seed, getattr(cfg, f"{which}_slope"), amplitude=amp)
    if preset == "euler_eigen":
        return euler_eigen(grid, amp)
    if preset == "gaussian_bump":
        f = gaussian_bump(grid, getattr(cfg, f"{which}_width"), amp)
        if which == "omega0":
            # vorticity must have zero mean
            f = f - SpectralField.constant(grid, f.mean)
        return f
    if preset == "single_block":
        q = getattr(cfg, f"{which}_q")
        try:
            return single_block(grid, q, seed, amp)
        except ValueError as exc:
            raise ConfigError(f"{which}_q: {exc}") from None
    raise ConfigError(f"{which}: unknown preset {preset!r}")


def build_velocity(cfg: RunConfig, grid: Grid) -> VectorField:
    if cfg.velocity == "shear":
        return shear_velocity(grid, cfg.velocity_amplitude)
    if cfg.velocity == "euler_eigen":
        return biot_savart(euler_eigen(grid, cfg.velocity_amplitude))
    return VectorField.constant(grid, 0.0, 0.0)


def build_forcing(cfg: RunConfig, grid: Grid) -> Optional[SpectralField]:
    if cfg.forcing == "none":
        return None
    try:
        return single_block(grid, cfg.forcing_q, cfg.seed + 2, cfg.forcing_amplitude)
    except ValueError as exc:
        raise ConfigError(f"forcing_q: {exc}") from None


def integrator(cfg: RunConfig, **over) -> IntegratorConfig:
    kw = dict(dt=cfg.dt, t_end=cfg.t_end, cfl_safety=cfg.cfl_safety, snapshot_stride=cfg.snapshot_stride)
    kw.update(over)
    return IntegratorConfig(**kw)


def run_from_config(cfg: RunConfig, alpha: Optional[float] = None, mode: Optional[str] = None,
                    **over) -> Trajectory:
    grid = cfg.grid
    a = cfg.alpha if alpha is None else alpha
    mode = mode or cfg.mode
    theta0 = build_field(cfg, "theta0", grid)
    icfg = integrator(cfg, **over)
    if mode == "transport":
        return solve_transport_diffusion(theta0, build_velocity(cfg, grid), build_forcing(cfg, grid), a, icfg)
    omega0 = build_field(cfg, "omega0", grid)
    return solve_boussinesq(omega0, theta0, cfg.source_function(), a, icfg)


# ---------------------------------------------------------------------------
# suites

def _ensemble(cfg: RunConfig) -> H.EnsembleSpec:
    return H.EnsembleSpec(cfg.ensemble_count, cfg.seed, cfg.ensemble_slope, cfg.ensemble_n)


def suite_bernstein(cfg: RunConfig) -> List[H.VerificationReport]:
    ens = _ensemble(cfg)
    qs = range(cfg.q_min, cfg.q_max + 1)
    out = [H.check_almost_orthogonality(ens), H.check_bernstein_sandwich(ens, qs)]
    for a in cfg.alphas_for_checks():
        for p in cfg.verify_p:
            if p > 1 and math.isfinite(p):
                out.append(H.check_generalized_bernstein(ens, a, p, qs))
    for a in (0.5, 1.0):
        for p in cfg.verify_p:
            if p > 1 and math.isfinite(p):
                out.append(H.check_positivity_corollary(ens, a, p))
    out.append(H.check_composition(ens, cfg.source_function()))
    return out


def suite_semigroup(cfg: RunConfig) -> List[H.VerificationReport]:
    ens = _ensemble(cfg)
    js = range(cfg.q_min, cfg.q_max + 1)
    out = []
    for a in cfg.alphas_for_checks():
        # p = 2: the annulus bounds the rate by (3/4)^a and (8/3)^a, with 10% slack
        out.append(H.check_semigroup_decay(ens, a, 2.0, js, rate_bounds=(0.9 * 0.75**a, 1.1 * (8 / 3) ** a)))
        for p in (4.0, math.inf):
            out.append(H.check_semigroup_decay(ens, a, p, js))
        out.append(H.check_semigroup_decay(ens, a, math.inf, js, single_mode=True))
    return out


def suite_smoothing(cfg: RunConfig) -> List[H.VerificationReport]:
    traj = run_from_config(cfg, mode="transport", snapshot_stride=1)
    out = [H.check_max_principle(traj)]
    for r in (2.0, 4.0):
        for rho in (1.0, 2.0, math.inf):
            out.append(H.check_smoothing_lr(traj, r=r, rho=rho))
    if not traj.has_forcing:
        out.append(H.check_smoothing_linf(traj))
    for s in (0.5, 1.0):
        out.append(H.check_besov_smoothing(traj, s))
    return out


def suite_apriori(cfg: RunConfig) -> List[H.VerificationReport]:
    grid = cfg.grid
    traj = run_from_config(cfg, mode="boussinesq", snapshot_stride=1)
    out = [H.track_apriori_cascade(traj), H.check_transport_besov(traj, BesovIndex(1.0 + 2.0 / 2, 2.0, 1.0))]
    w0, t0 = traj.states[0].omega, traj.states[0].theta
    pert = random_field(grid, cfg.seed + 3)
    F = cfg.source_function()
    icfg = integrator(cfg, snapshot_stride=1)
    full = twin_run_stability((w0, t0), (w0, t0 + pert * cfg.twin_delta), F, cfg.alpha, icfg,
                              base_run=traj)
    half = twin_run_stability((w0, t0), (w0, t0 + pert * (cfg.twin_delta / 2)), F, cfg.alpha, icfg,
                              base_run=traj)
    out.append(H.check_twin_stability(full, half, t_probe=min(0.25, cfg.t_end)))
    return out


def suite_transport(cfg: RunConfig) -> List[H.VerificationReport]:
    grid = cfg.grid
    theta0 = build_field(cfg, "theta0", grid)
    icfg = integrator(cfg, snapshot_stride=1)
    pure = solve_transport_diffusion(theta0, build_velocity(cfg, grid), build_forcing(cfg, grid), None, icfg)
    euler = solve_boussinesq(euler_eigen(grid), SpectralField.zeros(grid), cfg.source_function(),
                             cfg.alpha, icfg)
    return [H.check_transport_besov(pure), H.check_transport_besov(euler, BesovIndex(1.0, 2.0, 1.0))]


SUITE_FUNCS = {
    "bernstein": suite_bernstein,
    "semigroup": suite_semigroup,
    "smoothing": suite_smoothing,
    "apriori": suite_apriori,
    "transport": suite_transport,
}


def run_suite(name: str, cfg: RunConfig) -> List[H.VerificationReport]:
    if name == "all":
        return [r for key in SUITE_FUNCS for r in SUITE_FUNCS[key](cfg)]
    return SUITE_FUNCS[name](cfg)


# ---------------------------------------------------------------------------
# sweep

SWEEP_COLUMNS = ["alpha", "out_of_theorem_range", "status", "C0", "growth_rate",
                 "smoothing_linf_max", "smoothing_lr_max", "theta_l2_drop", "theta_linf_final",
                 "omega_linf_max", "V_final"]


def sweep_row(cfg: RunConfig, alpha: float, out_dir: Optional[str]) -> dict:
    row = {"alpha": alpha, "out_of_theorem_range": int(not (1.0 < alpha <= 2.0))}
    try:
        traj = run_from_config(cfg, alpha=alpha, mode="boussinesq", snapshot_stride=1)
    except SolverAbort as exc:
        row["status"] = f"abort: {exc}"
        return row
    if out_dir is not None:
        run_dir = Path(out_dir) / f"alpha_{format_float(alpha)}"
        run_dir.mkdir(parents=True, exist_ok=True)
        write_summary_csv(run_dir / "summary.csv", traj, cfg.summary_p)
    th0 = lp_norm(traj.states[0].theta, 2)
    cascade = H.track_apriori_cascade(traj) if len(traj) >= 10 else None
    row.update({
        "status": "ok",
        "C0": cascade.fitted["C0"] if cascade else math.nan,
        "growth_rate": cascade.fitted["growth_rate"] if cascade else math.nan,
        "smoothing_linf_max": H.check_smoothing_linf(traj).stat("ratio"),
        "smoothing_lr_max": H.check_smoothing_lr(traj, r=2.0, rho=1.0).stat("ratio"),
        "theta_l2_drop": 1.0 - lp_norm(traj.final.theta, 2) / th0 if th0 > 0 else 0.0,
        "theta_linf_final": lp_norm(traj.final.theta, math.inf),
        "omega_linf_max": max(lp_norm(s.omega, math.inf) for s in traj.states),
        "V_final": traj.final.V_accum,
    })
    return row


def _sweep_job(args):
    cfg, alpha, out_dir = args
    return sweep_row(cfg, alpha, out_dir)


def sweep_csv(rows: List[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow(["" if c not in r else (format_float(r[c]) if isinstance(r[c], float) else r[c])
                    for c in SWEEP_COLUMNS])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# commands

def _err(msg: str):
    print(f"error: {msg}", file=sys.stderr)


def cmd_simulate(args) -> int:
    cfg = load_config(args.config, args.seed)
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        traj = run_from_config(cfg)
    except SolverAbort as exc:
        _err(f"numerical abort: {exc}")
        return EXIT_NUMERIC
    write_trajectory(out / "trajectory.fbt", traj)
    write_summary_csv(out / "summary.csv", traj, cfg.summary_p)
    for flag in traj.flags:
        print(f"note: {flag}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    if args.suite is not None and args.suite not in SUITES:
        _err(f"unknown suite {args.suite!r}; choose from {list(SUITES)}")
        return EXIT_CONFIG
    cfg = load_config(args.config, args.seed)
    suites = [args.suite] if args.suite else list(dict.fromkeys(cfg.checks))
    if "all" in suites:
        suites = ["all"]
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    try:
        for name in suites:
            batch = run_suite(name, cfg)
            H.write_reports_json(out / f"report_{name}.json", batch)
            H.write_reports_csv(out / f"report_{name}.csv", batch)
            reports.extend(batch)
    except SolverAbort as exc:
        _err(f"numerical abort: {exc}")
        return EXIT_NUMERIC
    failed = [r.name for r in reports if r.status == H.FAIL]
    for r in reports:
        print(f"{r.status:>12}  {r.name}  {_short_params(r.params)}")
    if failed:
        _err(f"{len(failed)} check(s) failed: {', '.join(failed)}")
        return EXIT_CONFIG
    return EXIT_OK


def _short_params(params: dict) -> str:
    keys = [k for k in ("alpha", "p", "r", "rho", "s") if k in params]
    return " ".join(f"{k}={params[k]}" for k in keys)


def cmd_sweep(args) -> int:
    cfg = load_config(args.config, args.seed)
    values = list(args.values) if args.values else list(cfg.sweep_values)
    if not values:
        _err("sweep_values: empty value list")
        return EXIT_CONFIG
    bad = [v for v in values if not 0 < v <= 2]
    if bad:
        _err(f"sweep_values: {bad} outside (0, 2]")
        return EXIT_CONFIG
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    jobs = [(cfg, float(v), str(out)) for v in values]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    (out / "sweep.csv").write_text(sweep_csv(rows))
    aborted = [r for r in rows if str(r.get("status", "")).startswith("abort")]
    for r in aborted:
        _err(f"alpha={r['alpha']}: {r['status']}")
    return EXIT_NUMERIC if aborted else EXIT_OK


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return v


class _Parser(argparse.ArgumentParser):
    """Usage errors share the configuration-error exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="frac-boussinesq",
                                     description="Fractional Boussinesq solvers and estimate checks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="flat TOML configuration file")
        p.add_argument("--out", metavar="DIR", default=None,
                       help="output directory (default: the config's out key)")
        p.add_argument("--jobs", metavar="N", type=_pos_int, default=1, help="worker processes")
        p.add_argument("--seed", metavar="U64", type=_u64, default=None, help="override the config seed")

    p = sub.add_parser("simulate", help="run one simulation, write trajectory and summary CSV")
    common(p)
    p.set_defaults(func=cmd_simulate)
    p = sub.add_parser("verify", help="run a verification suite, write JSON and CSV reports")
    p.add_argument("suite", nargs="?", default=None,
                   help=f"one of {', '.join(SUITES)} (default: the config's checks list)")
    common(p)
    p.set_defaults(func=cmd_verify)
    p = sub.add_parser("sweep", help="repeat the Boussinesq run over several alpha values")
    p.add_argument("--values", type=float, nargs="+", help="alpha values (default: sweep_values)")
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
