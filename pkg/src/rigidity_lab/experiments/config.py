"""Experiment configuration: defaults, validation, TOML loading and hashing."""
from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..errors import ConfigError, LabError
from ..function_spaces import max_jet_order
from ..groups import build_group, named_density

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

KINDS = ("gap", "fixpoint", "banach", "barycenter", "norms", "compose", "interp",
         "rigidity", "metric", "pair", "bootstrap", "spread")

DEFAULT_GROUP = {
    "gap": "cyclic:3", "fixpoint": "symmetric:3", "banach": "cyclic:5", "barycenter": "cyclic:4",
    "norms": "cyclic:4", "compose": "cyclic:4", "interp": "cyclic:4", "rigidity": "cyclic:4",
    "metric": "cyclic:4", "pair": "cyclic:4", "bootstrap": "cyclic:4", "spread": "symmetric:3",
}

DEFAULT_TOL = {"rigidity": 1e-7, "bootstrap": 1e-7, "pair": 1e-11, "metric": 1e-13}

DEFAULT_GRID = {"pair": 256, "norms": 128, "compose": 64, "interp": 128}

# fields that never influence the numbers, excluded from the config hash
OUTPUT_FIELDS = ("out", "csv", "timing")


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    group: str = ""
    space: str = "S1"
    grid: int = 0
    band: int = 0
    k: int = 3
    p: float = 2.0
    amplitude: float = 0.05
    mode: int = 2
    density: str = "lazy-k2:0.7"
    m: str = "auto"
    C0: float = 0.5
    tol: float = 0.0
    max_iters: int = 300
    seed: int = 0
    trials: int = 20
    schedule: tuple = (3, 4, 5)
    subset_size: int = 0
    out: str = ""
    csv: str = ""
    timing: bool = False

    def resolved(self) -> "ExperimentConfig":
        """Fill kind-dependent defaults so that the stored config has no hidden values."""
        cfg = self
        if not cfg.group:
            cfg = replace(cfg, group=DEFAULT_GROUP.get(cfg.kind, "cyclic:4"))
        if cfg.grid == 0:
            cfg = replace(cfg, grid=DEFAULT_GRID.get(cfg.kind, 512))
        if cfg.tol == 0:
            cfg = replace(cfg, tol=DEFAULT_TOL.get(cfg.kind, 1e-12))
        if cfg.band == 0:
            cfg = replace(cfg, band=(3 * cfg.grid) // 8 if cfg.kind == "pair" else cfg.grid // 4)
        return replace(cfg, schedule=tuple(int(s) for s in cfg.schedule), p=float(cfg.p))

    def as_dict(self) -> dict:
        d = asdict(self)
        d["schedule"] = list(self.schedule)
        return d

    def hash(self) -> str:
        d = {k: v for k, v in self.as_dict().items() if k not in OUTPUT_FIELDS}
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def rng(self, trial: int = 0) -> np.random.Generator:
        """Counter-based stream keyed by (seed, config hash, trial)."""
        key = int(self.hash()[:16], 16)
        ss = np.random.SeedSequence([int(self.seed), key, int(trial)])
        return np.random.Generator(np.random.Philox(ss))


FIELD_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(name: str, value):
    kind = FIELD_TYPES[name]
    try:
        if kind == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError
            return int(value)
        if kind == "float":
            if isinstance(value, bool):
                raise ValueError
            return float(value)
        if kind == "bool":
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes"):
                    return True
                if value.lower() in ("0", "false", "no"):
                    return False
                raise ValueError
            return bool(value)
        if kind == "tuple":
            if isinstance(value, str):
                value = [v for v in value.replace(",", " ").split()]
            return tuple(int(v) for v in value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r} as {kind}") from None


def make_config(values: dict) -> ExperimentConfig:
    """Build and validate a config from a flat mapping (unknown keys are errors)."""
    unknown = sorted(set(values) - set(FIELD_TYPES))
    if unknown:
        raise ConfigError(f"unknown config field(s): {', '.join(unknown)}")
    if "kind" not in values:
        raise ConfigError("kind: missing experiment kind")
    clean = {k: _coerce(k, v) for k, v in values.items() if v is not None}
    cfg = ExperimentConfig(**clean).resolved()
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig) -> None:
    """Raise ConfigError naming the first invalid field."""
    if cfg.kind not in KINDS:
        raise ConfigError(f"kind: unknown experiment kind {cfg.kind!r}; choose one of {', '.join(KINDS)}")
    if not (1.0 < cfg.p < math.inf):
        raise ConfigError(f"p: need 1 < p < inf so that L^p is uniformly convex (got {cfg.p})")
    try:
        group = build_group(cfg.group)
    except LabError as exc:
        raise ConfigError(f"group: {exc}") from None
    if cfg.space not in ("S1", "T2"):
        raise ConfigError("space: must be S1 or T2")
    if cfg.grid < 8 or cfg.grid > 4096:
        raise ConfigError("grid: must lie in [8, 4096]")
    if not (1 <= cfg.band <= cfg.grid // 2):
        raise ConfigError(f"band: must lie in [1, grid/2 = {cfg.grid // 2}] to avoid aliasing")
    if cfg.k < 0 or cfg.k > max_jet_order(cfg.band):
        raise ConfigError(f"k: must lie in [0, {max_jet_order(cfg.band)}] at band {cfg.band}")
    if not (0.0 <= cfg.amplitude < 0.5):
        raise ConfigError("amplitude: must lie in [0, 0.5) so the conjugating map stays a diffeomorphism")
    if cfg.mode < 1:
        raise ConfigError("mode: must be a positive integer")
    try:
        named_density(group, cfg.density)
    except (LabError, ValueError) as exc:
        raise ConfigError(f"density: {exc}") from None
    if cfg.m != "auto":
        if not cfg.m.isdigit() or int(cfg.m) < 1:
            raise ConfigError("m: must be 'auto' or a positive integer")
    if not (0.0 < cfg.C0 < 1.0):
        raise ConfigError("C0: must lie in (0, 1)")
    if not (cfg.tol > 0 and math.isfinite(cfg.tol)):
        raise ConfigError("tol: must be a positive finite number")
    if cfg.max_iters < 1:
        raise ConfigError("max_iters: must be at least 1")
    if cfg.seed < 0:
        raise ConfigError("seed: must be nonnegative")
    if cfg.trials < 1:
        raise ConfigError("trials: must be at least 1")
    if cfg.kind == "bootstrap":
        s = list(cfg.schedule)
        if not (2 <= len(s) <= 4) or s != sorted(set(s)) or s[0] < 1:
            raise ConfigError("schedule: need 2 to 4 strictly increasing positive orders")
        if s[-1] > max_jet_order(cfg.band):
            raise ConfigError(f"schedule: orders above {max_jet_order(cfg.band)} are not resolvable at band {cfg.band}")
    if cfg.subset_size < 0:
        raise ConfigError("subset_size: must be nonnegative (0 picks the default)")
    if cfg.kind in ("rigidity", "metric", "pair", "bootstrap"):
        if cfg.space != "S1":
            raise ConfigError("space: the recovery pipelines run on S1")
        if group.kind not in ("cyclic", "dihedral"):
            raise ConfigError("group: recovery pipelines need a cyclic or dihedral group")
        if cfg.k < 1:
            raise ConfigError("k: recovery pipelines need k >= 1")


def _flatten(table: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in table.items():
        name = f"{prefix}.{key}" if prefix else key
        if isinstance(value, dict):
            out.update(_flatten(value, name))
        else:
            out[name] = value
    return out


def load_toml(path: str | Path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config file {path}: {exc}") from None


def config_values_from_toml(data: dict) -> dict:
    """Accept flat keys or dotted sections; the section name is dropped ([run] k = 3 means k = 3)."""
    flat = _flatten(data)
    values = {}
    for name, value in flat.items():
        key = name.rsplit(".", 1)[-1]
        if key in values and values[key] != value:
            raise ConfigError(f"{key}: given twice with different values")
        values[key] = value
    return values
