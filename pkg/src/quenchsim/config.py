"""Experiment configuration: TOML files, shipped presets, flag overrides.

Resolution order (later wins): preset -> --config file -> command-line
overrides.  The resolved mapping is hashed (sha256 of its canonical
JSON form, first 12 hex digits) and that hash is stamped into every
output artifact so any CSV can be traced back to the exact parameters
that produced it.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib  # py >= 3.11
except ModuleNotFoundError:  # pragma: no cover - version shim
    import tomli as tomllib

from .errors import ConfigError
from .schedules import QuenchSchedule, make_constant, make_linear_bias, make_tanh
from .toy_model import ToyParams

__all__ = [
    "ExperimentConfig",
    "load_toml",
    "load_preset",
    "preset_names",
    "resolve_config",
    "config_hash",
]

_MISSING = object()


def load_toml(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as ex:
        raise ConfigError(f"{path}: {ex}") from ex


def preset_names() -> list[str]:
    root = resources.files("quenchsim") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".toml"))


def load_preset(name: str) -> dict:
    res = resources.files("quenchsim") / "presets" / f"{name}.toml"
    if not res.is_file():
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}"
        )
    return tomllib.loads(res.read_text(encoding="utf-8"))


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _deep_merge(out[k], v)
        else:
            out[k] = v
    return out


def config_hash(data: dict) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


@dataclass
class ExperimentConfig:
    """Fully-merged experiment description with path-addressed access."""

    data: dict = field(default_factory=dict)

    @property
    def experiment(self) -> str:
        return self.require("experiment", str)

    @property
    def hash(self) -> str:
        return config_hash(self.data)

    def get(self, path: str, default=None):
        node = self.data
        for part in path.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return node

    def require(self, path: str, kind=None):
        val = self.get(path, _MISSING)
        if val is _MISSING:
            raise ConfigError(f"{path}: required field is missing")
        if kind is not None:
            if kind is float and isinstance(val, (int, float)) and not isinstance(val, bool):
                return float(val)
            if kind is int and isinstance(val, int) and not isinstance(val, bool):
                return val
            # bool passes isinstance(..., int); keep flags out of numeric fields
            if not isinstance(val, kind) or (kind is not bool and isinstance(val, bool)):
                raise ConfigError(
                    f"{path}: expected {kind.__name__}, got {type(val).__name__} ({val!r})"
                )
        return val

    def set(self, path: str, value) -> None:
        parts = path.split(".")
        node = self.data
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"{path}: {part} is not a table")
        node[parts[-1]] = value

    # -- typed section builders ------------------------------------------

    def schedule(self) -> QuenchSchedule:
        kind = self.require("schedule.kind", str)
        if kind == "constant":
            return make_constant(
                beta=self.require("schedule.beta", float),
                mu=self.require("schedule.mu", float),
            )
        if kind == "linear-bias":
            return make_linear_bias(
                self.require("schedule.tau_q", float),
                theta_k=float(self.get("schedule.theta", 0.0)),
                beta_ref=float(self.get("schedule.beta", 1.0)),
            )
        if kind == "tanh":
            return make_tanh(
                self.require("schedule.tau_q", float),
                beta_c=float(self.get("schedule.beta_c", 1.0)),
                constant_beta=bool(self.get("schedule.constant_beta", True)),
            )
        raise ConfigError(
            f"schedule.kind: unknown kind {kind!r} (want constant, linear-bias, or tanh)"
        )

    def toy_params(self) -> ToyParams:
        return ToyParams(
            e=self.require("model.e", float),
            n_c=self.require("model.n_c", float),
            gamma=float(self.get("model.gamma", 1.0)),
            gamma_tilde=self.get("model.gamma_tilde"),
        )


def _parse_scalar(text: str):
    """Flag values arrive as strings; decode with TOML scalar rules."""
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


def resolve_config(
    preset: str | None = None,
    config_path=None,
    overrides: dict | None = None,
) -> ExperimentConfig:
    """Merge preset, file, and override mappings (later wins)."""
    data: dict = {}
    if preset is not None:
        data = _deep_merge(data, load_preset(preset))
    if config_path is not None:
        data = _deep_merge(data, load_toml(config_path))
    for path, value in (overrides or {}).items():
        if isinstance(value, str):
            value = _parse_scalar(value)
        cfg = ExperimentConfig(data)
        cfg.set(path, value)
        data = cfg.data
    return ExperimentConfig(data)
