"""Experiment configuration: a single YAML file validated against a JSON schema."""
from __future__ import annotations

import copy
from dataclasses import asdict, dataclass, field
from pathlib import Path

import jsonschema
import yaml

SCENARIOS = (
    "transport_oracle",
    "freeconv_validate",
    "lemma31_lipschitz",
    "lemma32_bounds",
    "contraction_run",
    "haar_absorption",
    "contraction_fact24",
)

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "ExperimentConfig",
    "type": "object",
    "additionalProperties": False,
    "required": ["scenario", "N", "seeds"],
    "properties": {
        "scenario": {"enum": list(SCENARIOS), "description": "which experiment to run"},
        "N": {"type": "integer", "minimum": 1, "description": "matrix dimension"},
        "seeds": {
            "type": "array",
            "minItems": 1,
            "items": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
            "description": "master seeds; each seed is one independent shard",
        },
        "t_grid": {
            "type": "array",
            "items": {"type": "number", "minimum": 0},
            "description": "homotopy times (strictly increasing)",
        },
        "grid": {"type": ["integer", "null"], "minimum": 1, "description": "Haar grid size; null means N"},
        "adaptive": {"type": "boolean", "description": "adaptive ladder (freeness-defect acceptance)"},
        "output_dir": {"type": ["string", "null"], "description": "artifact directory"},
        "workers": {"type": "integer", "minimum": 1, "description": "size of the per-seed worker pool"},
        "tolerances": {
            "type": "object",
            "additionalProperties": {"type": "number", "minimum": 0},
            "description": "overrides for named assertion thresholds",
        },
        "params": {"type": "object", "description": "scenario-specific knobs (counts, caps)"},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    scenario: str
    N: int
    seeds: list
    t_grid: list = field(default_factory=lambda: [round(0.25 * i, 10) for i in range(25)])
    grid: int | None = None
    adaptive: bool = False
    output_dir: str | None = None
    workers: int = 1
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        validate(asdict(self))
        if any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ConfigError("t_grid must be strictly increasing")

    @property
    def haar_grid(self) -> int:
        return self.N if self.grid is None else self.grid

    def tol(self, name: str, default: float) -> float:
        return float(self.tolerances.get(name, default))

    def param(self, name: str, default):
        return self.params.get(name, default)

    def to_dict(self) -> dict:
        return copy.deepcopy(asdict(self))

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        validate(data)
        return cls(**copy.deepcopy(data))


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"invalid config at {where}: {exc.message}") from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    return ExperimentConfig.from_dict(data)
