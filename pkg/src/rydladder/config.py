"""Run configuration: a declarative JSON file plus flag overrides.

A config file mirrors the sections below; every key is optional and
flags win over file values.  Within the exclusive pairs (`a` vs
`rb_over_a`, `delta` vs `delta_over_omega`) exactly one member must be
set once file and flags are merged; a flag from a pair replaces the
whole pair.

    {
      "geometry":      {"n_rungs": 7, "rb_over_a": 2.173, "rho": 2.0},
      "physics":       {"omega": 12.566, "delta_over_omega": 2.0, "c6": 5420464.0},
      "evolution":     {"window": 1.8, "samples": 61, "t_f": null,
                        "tolerance": 1e-8, "max_krylov_dim": 30},
      "hadronization": {"n_shots": 1000, "seed": 0, "rr_policy": "zero",
                        "calibration": {"e_lo": 1.0, "e_hi": 10.0,
                                        "delta_lo": 2.0, "delta_hi": 3.0}},
      "sweep":         {"delta_over_omega": [2.0, 2.5, 3.0], "rb_over_a": [2.173]},
      "output":        {"directory": "."}
    }
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .hadronize import EnergyDetuningCalibration, HadronizationConfig, RR_POLICIES
from .lattice import (
    DEFAULT_C6,
    DEFAULT_INV_ASPECT_RATIO,
    DEFAULT_RABI_FREQUENCY,
    LadderGeometry,
    PhysicalParams,
    blockade_radius,
    build_ladder,
)

OUTDIR_ENV_VAR = "RYDLADDER_OUTDIR"

DEFAULT_SWEEP_DELTA = [2.0, 2.5, 3.0]
DEFAULT_SWEEP_RB = [2.173]


@dataclass
class RunConfig:
    """Raw, possibly partial, run settings prior to resolution."""

    n_rungs: int = 7
    a: float | None = None
    rb_over_a: float | None = None
    rho: float = DEFAULT_INV_ASPECT_RATIO
    omega: float = DEFAULT_RABI_FREQUENCY
    delta: float | None = None
    delta_over_omega: float | None = None
    c6: float = DEFAULT_C6
    window: float = 1.8
    samples: int = 61
    t_f: float | None = None
    tolerance: float = 1e-8
    max_krylov_dim: int = 30
    n_shots: int = 1000
    seed: int = 0
    rr_policy: str = "zero"
    e_lo: float = 1.0
    e_hi: float = 10.0
    cal_delta_lo: float = 2.0
    cal_delta_hi: float = 3.0
    sweep_delta: list[float] = field(default_factory=lambda: list(DEFAULT_SWEEP_DELTA))
    sweep_rb: list[float] = field(default_factory=lambda: list(DEFAULT_SWEEP_RB))
    out_dir: str | None = None
    workers: int | None = None


# config-file key -> RunConfig attribute
_FILE_SCHEMA = {
    "geometry": {"n_rungs": "n_rungs", "a": "a", "rb_over_a": "rb_over_a", "rho": "rho"},
    "physics": {
        "omega": "omega",
        "delta": "delta",
        "delta_over_omega": "delta_over_omega",
        "c6": "c6",
    },
    "evolution": {
        "window": "window",
        "samples": "samples",
        "t_f": "t_f",
        "tolerance": "tolerance",
        "max_krylov_dim": "max_krylov_dim",
    },
    "hadronization": {
        "n_shots": "n_shots",
        "seed": "seed",
        "rr_policy": "rr_policy",
        "calibration": {
            "e_lo": "e_lo",
            "e_hi": "e_hi",
            "delta_lo": "cal_delta_lo",
            "delta_hi": "cal_delta_hi",
        },
    },
    "sweep": {"delta_over_omega": "sweep_delta", "rb_over_a": "sweep_rb"},
    "output": {"directory": "out_dir", "workers": "workers"},
}

_EXCLUSIVE_PAIRS = (("a", "rb_over_a"), ("delta", "delta_over_omega"))


def load_config_file(path: str) -> RunConfig:
    """Parse a JSON config file into a RunConfig, rejecting unknown keys."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    cfg = RunConfig()
    _apply_section(cfg, raw, _FILE_SCHEMA, prefix="")
    return cfg


def _apply_section(cfg: RunConfig, raw, schema, prefix: str) -> None:
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {prefix or '<root>'} must be an object")
    for key, value in raw.items():
        where = f"{prefix}{key}"
        if key not in schema:
            raise ConfigError(f"unknown config key: {where}")
        target = schema[key]
        if isinstance(target, dict):
            _apply_section(cfg, value, target, prefix=f"{where}.")
        elif value is not None:
            setattr(cfg, target, value)


def apply_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply flag overrides (attribute -> value); a flag belonging to an
    exclusive pair clears the other member so flags always win."""
    for pair in _EXCLUSIVE_PAIRS:
        if any(overrides.get(name) is not None for name in pair):
            for name in pair:
                setattr(cfg, name, None)
    valid = {f.name for f in fields(RunConfig)}
    for name, value in overrides.items():
        if value is None:
            continue
        if name not in valid:
            raise ConfigError(f"unknown config field: {name}")
        setattr(cfg, name, value)
    return cfg


@dataclass
class ResolvedRun:
    """Validated configuration with derived quantities filled in."""

    config: RunConfig
    geometry: LadderGeometry
    params: PhysicalParams
    calibration: EnergyDetuningCalibration
    blockade_radius: float
    a: float
    rb_over_a: float
    delta: float
    delta_over_omega: float
    t_f: float
    out_dir: str

    def hadronization_config(self) -> HadronizationConfig:
        return HadronizationConfig(
            geometry=self.geometry,
            params=self.params,
            calibration=self.calibration,
            t_f=self.config.t_f,
            rr_policy=self.config.rr_policy,
            tolerance=self.config.tolerance,
            max_krylov_dim=self.config.max_krylov_dim,
        )

    def to_metadata(self) -> dict:
        c = self.config
        return {
            "geometry": {
                "n_rungs": c.n_rungs,
                "a": self.a,
                "rb_over_a": self.rb_over_a,
                "rho": c.rho,
                "blockade_radius": self.blockade_radius,
            },
            "physics": {
                "omega": c.omega,
                "delta": self.delta,
                "delta_over_omega": self.delta_over_omega,
                "c6": c.c6,
            },
            "evolution": {
                "window": c.window,
                "samples": c.samples,
                "t_f": self.t_f,
                "tolerance": c.tolerance,
                "max_krylov_dim": c.max_krylov_dim,
            },
            "hadronization": {
                "n_shots": c.n_shots,
                "seed": c.seed,
                "rr_policy": c.rr_policy,
                "calibration": {
                    "e_lo": c.e_lo,
                    "e_hi": c.e_hi,
                    "delta_lo": c.cal_delta_lo,
                    "delta_hi": c.cal_delta_hi,
                },
            },
            "sweep": {
                "delta_over_omega": list(c.sweep_delta),
                "rb_over_a": list(c.sweep_rb),
            },
        }


def resolve(cfg: RunConfig) -> ResolvedRun:
    """Validate a RunConfig and derive the concrete geometry and drive."""
    problems = []
    for pair in _EXCLUSIVE_PAIRS:
        given = [name for name in pair if getattr(cfg, name) is not None]
        if len(given) != 1:
            problems.append(
                f"exactly one of {pair[0]} or {pair[1]} must be given"
                + (f" (got {', '.join(given)})" if given else " (got neither)")
            )
    if cfg.n_rungs < 1:
        problems.append(f"n_rungs must be >= 1 (got {cfg.n_rungs})")
    if cfg.tolerance <= 0:
        problems.append(f"tolerance must be > 0 (got {cfg.tolerance})")
    if cfg.window < 0:
        problems.append(f"window must be >= 0 (got {cfg.window})")
    if cfg.samples < 1:
        problems.append(f"samples must be >= 1 (got {cfg.samples})")
    if cfg.n_shots < 1:
        problems.append(f"n_shots must be >= 1 (got {cfg.n_shots})")
    if cfg.max_krylov_dim < 2:
        problems.append(f"max_krylov_dim must be >= 2 (got {cfg.max_krylov_dim})")
    if cfg.rr_policy not in RR_POLICIES:
        problems.append(f"rr_policy must be one of {RR_POLICIES} (got {cfg.rr_policy!r})")
    if cfg.t_f is not None and cfg.t_f < 0:
        problems.append(f"t_f must be >= 0 (got {cfg.t_f})")
    if problems:
        raise ConfigError("invalid configuration: " + "; ".join(problems))

    params_bare = PhysicalParams(rabi_frequency=cfg.omega, global_detuning=0.0, c6=cfg.c6)
    rb = blockade_radius(params_bare)
    if cfg.a is not None:
        a = float(cfg.a)
        rb_over_a = rb / a
    else:
        if cfg.rb_over_a <= 0:
            raise ConfigError(f"rb_over_a must be > 0 (got {cfg.rb_over_a})")
        rb_over_a = float(cfg.rb_over_a)
        a = rb / rb_over_a
    delta = float(cfg.delta) if cfg.delta is not None else cfg.delta_over_omega * cfg.omega
    geometry = build_ladder(cfg.n_rungs, a, cfg.rho)
    params = PhysicalParams(rabi_frequency=cfg.omega, global_detuning=delta, c6=cfg.c6)
    calibration = EnergyDetuningCalibration(
        e_lo=cfg.e_lo, e_hi=cfg.e_hi, delta_lo=cfg.cal_delta_lo, delta_hi=cfg.cal_delta_hi
    )
    from .hadronize import default_measurement_time

    t_f = cfg.t_f if cfg.t_f is not None else default_measurement_time(cfg.n_rungs)
    out_dir = cfg.out_dir or os.environ.get(OUTDIR_ENV_VAR) or "."
    return ResolvedRun(
        config=cfg,
        geometry=geometry,
        params=params,
        calibration=calibration,
        blockade_radius=rb,
        a=a,
        rb_over_a=rb_over_a,
        delta=delta,
        delta_over_omega=delta / cfg.omega,
        t_f=t_f,
        out_dir=out_dir,
    )
