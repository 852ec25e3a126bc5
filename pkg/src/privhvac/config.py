"""Experiment configuration: JSON files mirroring the controller's parameter
names, validated strictly (unknown keys rejected, invariants enforced) and
complete under defaults — an empty file is a full default experiment."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adversary import AttackConfig
from .distortion import DesignConfig
from .thermal import (ComfortBand, HvacParams, MpcConfig, MpcProblem, Tariff,
                      ZoneThermalParams)

DEFAULT_WORLD_OCCUPANTS = 4
DEFAULT_WORLD_ZONES = 3


class ConfigError(ValueError):
    """Configuration file rejected; message carries the offending key."""


@dataclass(frozen=True)
class WorldSpec:
    """Where the experiment's world comes from: a synthetic model drawn from
    the master seed, a saved model file, or a recorded dataset manifest."""

    kind: str = "synthetic"
    occupants: int = DEFAULT_WORLD_OCCUPANTS
    zones: int = DEFAULT_WORLD_ZONES
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("synthetic", "model", "dataset"):
            raise ConfigError(f"world.kind: unknown kind {self.kind!r}")
        if self.kind == "synthetic":
            if self.occupants < 1 or self.zones < 1:
                raise ConfigError("world: occupants and zones must be positive")
        elif self.path is None:
            raise ConfigError(f"world.path: required for kind {self.kind!r}")


@dataclass(frozen=True)
class SweepSpec:
    """Tradeoff-sweep and scheme-comparison settings."""

    deltas: tuple[float, ...] | None = None
    points: int = 8
    runs: int = 10
    n_steps: int | None = None
    T_init: float = 25.0
    schemes: tuple[str, ...] = ("identity", "uniform", "multinomial:0.7",
                                "fixed-schedule")

    def __post_init__(self):
        if self.deltas is not None:
            object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
            if any(b <= a for a, b in zip(self.deltas, self.deltas[1:])):
                raise ConfigError("sweep.deltas: must be strictly ascending")
        if self.points < 1:
            raise ConfigError("sweep.points: must be positive")
        if self.runs < 1:
            raise ConfigError("sweep.runs: must be positive")
        if self.n_steps is not None and self.n_steps < 1:
            raise ConfigError("sweep.n_steps: must be positive")
        object.__setattr__(self, "schemes", tuple(self.schemes))


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully validated experiment: world source, physical parameters,
    controller, mechanism-design and attack settings, sweep spec, seed."""

    world: WorldSpec = field(default_factory=WorldSpec)
    problem: MpcProblem = field(default_factory=MpcProblem)
    mpc: MpcConfig = field(default_factory=MpcConfig)
    design: DesignConfig = field(default_factory=DesignConfig)
    attack: AttackConfig = field(default_factory=AttackConfig)
    sweep: SweepSpec = field(default_factory=SweepSpec)
    seed: int = 0
    output_dir: str = "out"

    def __post_init__(self):
        if self.seed < 0:
            raise ConfigError("seed: must be nonnegative")


@dataclass(frozen=True)
class DatasetManifest:
    """Recorded-trace dataset: canonical CSV files, subsampling period,
    train/eval split (in subsampled steps), and the occupant roster."""

    traces: tuple[str, ...]
    period: int = 1
    train_end: int | None = None
    eval_end: int | None = None
    occupants: tuple[str, ...] = ()
    zones: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "traces", tuple(self.traces))
        object.__setattr__(self, "occupants", tuple(self.occupants))
        if not self.traces:
            raise ConfigError("manifest.traces: need at least one trace file")
        if self.period < 1:
            raise ConfigError("manifest.period: must be a positive step count")
        if self.train_end is not None and self.train_end < 1:
            raise ConfigError("manifest.train_end: must be positive")
        if (self.train_end is not None and self.eval_end is not None
                and self.eval_end <= self.train_end):
            raise ConfigError("manifest: split boundaries must be ordered")
        if self.zones is not None and self.zones < 1:
            raise ConfigError("manifest.zones: must be positive")


# allowed keys per configuration block
_THERMAL_KEYS = {"dt", "C", "c_o", "c_p", "R", "eta_h", "eta_c", "beta",
                 "r_e", "r_h", "T_low", "T_high", "T_a", "m_min", "m_max",
                 "T_h_max", "T_out"}
_MPC_KEYS = {"horizon_steps", "update_steps", "block_steps", "comfort_penalty",
             "convergence_tol", "max_linearizations", "lp_tol", "lp_max_iter"}
_DESIGN_KEYS = {"delta", "delta_T", "delta_T_prime", "temp_grid_step",
                "fw_tolerance", "fw_max_iters", "line_search"}
_ATTACK_KEYS = {"beam_width", "bruteforce_cap"}
_SWEEP_KEYS = {"deltas", "points", "runs", "n_steps", "T_init", "schemes"}
_WORLD_KEYS = {"kind", "occupants", "zones", "path"}
_TOP_KEYS = {"world", "thermal", "mpc", "design", "attack", "sweep", "seed",
             "output_dir"}
_MANIFEST_KEYS = {"traces", "period", "train_end", "eval_end", "occupants",
                  "zones"}


def load_config(path) -> ExperimentConfig:
    """Read and validate an experiment configuration file.

    Absent fields take the published defaults; an empty object is a complete
    default experiment.  Unknown keys at any level are rejected, parse errors
    carry the line number, and every parameter invariant is enforced."""
    raw = _read_json(path)
    return config_from_dict(raw)


def config_from_dict(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("configuration root must be an object")
    _check_keys(raw, _TOP_KEYS, "")
    world = _build_world(raw.get("world", {}))
    problem, dt = _build_problem(raw.get("thermal", {}))
    mpc = _build_mpc(raw.get("mpc", {}), dt)
    design = _build(DesignConfig, raw.get("design", {}), _DESIGN_KEYS, "design")
    attack = _build(AttackConfig, raw.get("attack", {}), _ATTACK_KEYS, "attack")
    sweep = _build(SweepSpec, raw.get("sweep", {}), _SWEEP_KEYS, "sweep")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed: must be an integer")
    output_dir = raw.get("output_dir", "out")
    if not isinstance(output_dir, str) or not output_dir:
        raise ConfigError("output_dir: must be a nonempty string")
    return ExperimentConfig(world, problem, mpc, design, attack, sweep,
                            seed, output_dir)


def load_manifest(path) -> DatasetManifest:
    """Read and validate a dataset manifest; every trace file must exist."""
    raw = _read_json(path)
    if not isinstance(raw, dict):
        raise ConfigError("manifest root must be an object")
    _check_keys(raw, _MANIFEST_KEYS, "manifest.")
    try:
        manifest = DatasetManifest(
            traces=tuple(raw.get("traces", ())),
            period=raw.get("period", 1),
            train_end=raw.get("train_end"),
            eval_end=raw.get("eval_end"),
            occupants=tuple(raw.get("occupants", ())),
            zones=raw.get("zones"),
        )
    except TypeError as exc:
        raise ConfigError(f"manifest: {exc}") from exc
    base = Path(path).parent
    for t in manifest.traces:
        p = Path(t)
        if not (base / p).exists() and not p.exists():
            raise ConfigError(f"manifest.traces: file not found: {t}")
    return manifest


def resolve_manifest_paths(manifest: DatasetManifest, manifest_path) -> list[Path]:
    """Trace paths interpreted relative to the manifest's directory."""
    base = Path(manifest_path).parent
    out = []
    for t in manifest.traces:
        p = Path(t)
        out.append(p if p.exists() else base / p)
    return out


# ---------------------------------------------------------------------------
# internals


def _read_json(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not text.strip():
        return {}
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"{path}: parse error at line {exc.lineno}, column {exc.colno}: "
            f"{exc.msg}") from exc


def _check_keys(block: dict, allowed: set, prefix: str):
    if not isinstance(block, dict):
        raise ConfigError(f"{prefix.rstrip('.') or 'configuration'}: "
                          "must be an object")
    unknown = sorted(set(block) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {prefix}{unknown[0]!r}")


def _build(cls, block: dict, allowed: set, name: str):
    _check_keys(block, allowed, f"{name}.")
    kwargs = dict(block)
    if cls is SweepSpec and "schemes" in kwargs:
        kwargs["schemes"] = tuple(kwargs["schemes"])
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{name}: {exc}") from exc


def _build_world(block: dict) -> WorldSpec:
    _check_keys(block, _WORLD_KEYS, "world.")
    try:
        return WorldSpec(**block)
    except TypeError as exc:
        raise ConfigError(f"world: {exc}") from exc


def _build_problem(block: dict) -> tuple[MpcProblem, float]:
    _check_keys(block, _THERMAL_KEYS, "thermal.")
    b = dict(block)
    dt = b.pop("dt", 60.0)
    R = b.pop("R", 0)
    R_row = None if np.ndim(R) == 0 and float(np.asarray(R)) == 0 else np.atleast_1d(R)
    try:
        zone = ZoneThermalParams(C=b.pop("C", 1000.0), c_o=b.pop("c_o", 0.1),
                                 c_p=b.pop("c_p", 1.0), R_row=R_row)
        hvac = HvacParams(eta_h=b.pop("eta_h", 0.9), eta_c=b.pop("eta_c", 4.0),
                          beta=b.pop("beta", 0.5), T_a=b.pop("T_a", 12.8),
                          T_h_max=b.pop("T_h_max", 40.0),
                          m_min=b.pop("m_min", 0.084),
                          m_max=b.pop("m_max", 1.5),
                          T_out=b.pop("T_out", 30.0))
        comfort = ComfortBand(T_low=b.pop("T_low", 24.0),
                              T_high=b.pop("T_high", 26.0))
        tariff = Tariff(r_e=_rate(b.pop("r_e", 1.5e-4)),
                        r_h=_rate(b.pop("r_h", 5e-6)))
    except ValueError as exc:
        raise ConfigError(f"thermal: {exc}") from exc
    if not isinstance(dt, (int, float)) or dt <= 0:
        raise ConfigError("thermal.dt: must be positive")
    return MpcProblem(zone, hvac, comfort, tariff), float(dt)


def _build_mpc(block: dict, dt: float) -> MpcConfig:
    _check_keys(block, _MPC_KEYS, "mpc.")
    try:
        return MpcConfig(dt=dt, **block)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"mpc: {exc}") from exc


def _rate(v):
    return [float(x) for x in v] if isinstance(v, (list, tuple)) else float(v)
