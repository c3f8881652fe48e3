"""Run configuration: a flat TOML file validated key by key.

Every key has a documented default (see ``FIELDS``); unknown keys, wrong
types and out-of-range values raise :class:`ConfigError` naming the key.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Optional

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10
    import tomli as tomllib

from .sources import SourceFunction
from .spectral import Grid

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "PRESETS", "SUITES"]

PRESETS = ("zero", "random", "euler_eigen", "gaussian_bump", "single_block")
VELOCITIES = ("shear", "euler_eigen", "zero")
FORCINGS = ("none", "single_block")
SOURCES = ("linear", "cubic", "sine", "polynomial")
MODES = ("boussinesq", "transport")
SUITES = ("bernstein", "semigroup", "smoothing", "apriori", "transport", "all")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    # run
    mode: str = "boussinesq"
    n: int = 128
    alpha: float = 1.5
    seed: int = 0
    # source F
    source: str = "linear"
    source_coeffs1: tuple = (0.0,)
    source_coeffs2: tuple = (0.0, 1.0)
    # initial data
    theta0: str = "random"
    theta0_amplitude: float = 1.0
    theta0_slope: float = 2.0
    theta0_q: int = 2
    theta0_width: float = 0.5
    omega0: str = "zero"
    omega0_amplitude: float = 1.0
    omega0_slope: float = 2.0
    omega0_q: int = 2
    omega0_width: float = 0.5
    # transport-diffusion drivers
    velocity: str = "shear"
    velocity_amplitude: float = 1.0
    forcing: str = "none"
    forcing_q: int = 1
    forcing_amplitude: float = 1.0
    # integrator
    dt: float = 0.01
    t_end: float = 1.0
    cfl_safety: float = 0.5
    snapshot_stride: int = 1
    # outputs and checks
    out: str = "out"
    summary_p: float = 2.0
    checks: tuple = ("all",)
    ensemble_count: int = 16
    ensemble_n: int = 128
    ensemble_slope: float = 2.0
    q_min: int = 2
    q_max: int = 5
    verify_alphas: tuple = ()
    verify_p: tuple = (1.5, 2.0, 3.0)
    twin_delta: float = 1e-4
    # sweep
    sweep_param: str = "alpha"
    sweep_values: tuple = ()

    def source_function(self) -> SourceFunction:
        return SourceFunction.from_name(self.source, self.source_coeffs1, self.source_coeffs2)

    @property
    def grid(self) -> Grid:
        return Grid(self.n)

    def alphas_for_checks(self) -> tuple:
        return self.verify_alphas or (self.alpha,)


def _num(key, v, integer=False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if integer:
        if isinstance(v, float) and not v.is_integer():
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        return int(v)
    if not math.isfinite(float(v)):
        raise ConfigError(f"{key}: must be finite")
    return float(v)


def _choice(options):
    def check(key, v):
        if not isinstance(v, str) or v not in options:
            raise ConfigError(f"{key}: expected one of {list(options)}, got {v!r}")
        return v
    return check


def _positive(key, v):
    v = _num(key, v)
    if not v > 0:
        raise ConfigError(f"{key}: must be positive, got {v}")
    return v


def _pos_int(key, v):
    v = _num(key, v, integer=True)
    if v < 1:
        raise ConfigError(f"{key}: must be >= 1, got {v}")
    return v


def _int(key, v):
    return _num(key, v, integer=True)


def _alpha(key, v):
    v = _num(key, v)
    if not 0 < v <= 2:
        raise ConfigError(f"{key}: must lie in (0, 2], got {v}")
    return v


def _grid_n(key, v):
    v = _num(key, v, integer=True)
    try:
        Grid(v)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return v


def _seed(key, v):
    v = _num(key, v, integer=True)
    if not 0 <= v < 2**64:
        raise ConfigError(f"{key}: must be an unsigned 64-bit integer, got {v}")
    return v


def _list_of(item):
    def check(key, v):
        if not isinstance(v, list):
            raise ConfigError(f"{key}: expected a list, got {v!r}")
        return tuple(item(f"{key}[{i}]", x) for i, x in enumerate(v))
    return check


def _p_value(key, v):
    if isinstance(v, str) and v.lower() in ("inf", "infinity"):
        return math.inf
    v = _num(key, v)
    if not v >= 1:
        raise ConfigError(f"{key}: must be >= 1, got {v}")
    return v


def _cfl(key, v):
    v = _num(key, v)
    if not 0 < v <= 1:
        raise ConfigError(f"{key}: must lie in (0, 1], got {v}")
    return v


def _path(key, v):
    if not isinstance(v, str) or not v:
        raise ConfigError(f"{key}: expected a non-empty path string, got {v!r}")
    return v


FIELDS = {
    "mode": _choice(MODES),
    "n": _grid_n,
    "alpha": _alpha,
    "seed": _seed,
    "source": _choice(SOURCES),
    "source_coeffs1": _list_of(_num),
    "source_coeffs2": _list_of(_num),
    "theta0": _choice(PRESETS),
    "theta0_amplitude": _num,
    "theta0_slope": _num,
    "theta0_q": _int,
    "theta0_width": _positive,
    "omega0": _choice(PRESETS),
    "omega0_amplitude": _num,
    "omega0_slope": _num,
    "omega0_q": _int,
    "omega0_width": _positive,
    "velocity": _choice(VELOCITIES),
    "velocity_amplitude": _num,
    "forcing": _choice(FORCINGS),
    "forcing_q": _int,
    "forcing_amplitude": _num,
    "dt": _positive,
    "t_end": _positive,
    "cfl_safety": _cfl,
    "snapshot_stride": _pos_int,
    "out": _path,
    "summary_p": _p_value,
    "checks": _list_of(_choice(SUITES)),
    "ensemble_count": _pos_int,
    "ensemble_n": _grid_n,
    "ensemble_slope": _num,
    "q_min": _int,
    "q_max": _int,
    "verify_alphas": _list_of(_alpha),
    "verify_p": _list_of(_p_value),
    "twin_delta": _positive,
    "sweep_param": _choice(("alpha",)),
    "sweep_values": _list_of(_alpha),
}

assert set(FIELDS) == {f.name for f in fields(RunConfig)}


def parse_config(data: dict, seed: Optional[int] = None) -> RunConfig:
    values: dict[str, Any] = {}
    for key, raw in data.items():
        if isinstance(raw, dict):
            raise ConfigError(f"{key}: tables are not supported; use flat keys")
        if key not in FIELDS:
            raise ConfigError(f"{key}: unknown configuration key")
        values[key] = FIELDS[key](key, raw)
    if seed is not None:
        values["seed"] = _seed("--seed", seed)
    cfg = RunConfig(**values)
    if cfg.q_min > cfg.q_max:
        raise ConfigError(f"q_min: {cfg.q_min} exceeds q_max {cfg.q_max}")
    from .littlewood_paley import DEFAULT_PARTITION
    top = DEFAULT_PARTITION.q_max(Grid(cfg.ensemble_n))
    if cfg.q_min < -1 or cfg.q_max > top:
        raise ConfigError(f"q_max: block range [{cfg.q_min}, {cfg.q_max}] outside [-1, {top}] "
                          f"for ensemble_n={cfg.ensemble_n}")
    try:
        cfg.source_function()
    except ValueError as exc:
        raise ConfigError(f"source_coeffs1/source_coeffs2: {exc}") from None
    return cfg


def load_config(path: Optional[str], seed: Optional[int] = None) -> RunConfig:
    if path is None:
        return parse_config({}, seed)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, seed)


def with_alpha(cfg: RunConfig, alpha: float) -> RunConfig:
    return replace(cfg, alpha=alpha)
