"""Scenario configuration: a YAML file validated against a strict schema.

Unknown keys are rejected. Errors carry the offending field path and, when
the file is available, the line it sits on.
"""

from __future__ import annotations

from pathlib import Path
from typing import Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator


class ConfigError(Exception):
    """Invalid or unreadable scenario configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ModelSection(_Strict):
    kind: Literal["interval", "block", "custom-matrix"] = "interval"
    N: int | None = Field(default=None, ge=5)
    blocks: list["ModelSection"] | None = None
    matrix_file: str | None = None
    k_file: str | None = None

    @model_validator(mode="after")
    def _fields_for_kind(self):
        if self.kind == "interval" and self.N is None:
            raise ValueError("interval model needs N")
        if self.kind == "block" and (self.blocks is None or len(self.blocks) != 2):
            raise ValueError("block model needs exactly two entries under blocks")
        if self.kind == "custom-matrix" and (self.matrix_file is None or self.k_file is None):
            raise ValueError("custom-matrix model needs matrix_file and k_file")
        return self


class Tolerances(_Strict):
    rank_tol: float = Field(default=1e-8, gt=0)
    dedup_tol: float = Field(default=1e-6, gt=0)
    leq_tol: float = Field(default=1e-6, gt=0)
    green_tol: float = Field(default=1e-10, gt=0)
    continuum_tol: float = Field(default=1e-8, gt=0)
    prop1_tol: float = Field(default=1e-8, gt=0)


class TimeSection(_Strict):
    T_max: float = Field(default=1.0, gt=0)
    steps: int = Field(default=100, ge=5)


class Budget(_Strict):
    max_elements: int = Field(default=500, ge=1)
    max_rounds: int = Field(default=20, ge=1)


class Outputs(_Strict):
    directory: str = "out"
    formats: list[Literal["report", "csv", "svg"]] = ["report", "csv", "svg"]


class Checks(_Strict):
    triples: int = Field(default=100, ge=1)
    prop1_samples: int = Field(default=20, ge=1)
    continuum_M: int = Field(default=401, ge=3)
    reconstruct_threshold: float = Field(default=0.9, ge=0, le=1)
    slope_min: float = 1.8


class Fault(_Strict):
    corrupt_k: float = Field(default=0.0, ge=0)


class ScenarioConfig(_Strict):
    model: ModelSection = ModelSection(kind="interval", N=20)
    tolerances: Tolerances = Tolerances()
    time: TimeSection = TimeSection()
    budget: Budget = Budget()
    outputs: Outputs = Outputs()
    checks: Checks = Checks()
    seed: int = 0
    fault: Fault = Field(default=Fault(), alias="_fault")

    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    @property
    def time_grid(self) -> np.ndarray:
        return np.linspace(0.0, self.time.T_max, self.time.steps + 1)

    def echo(self) -> dict:
        return self.model_dump(mode="json", by_alias=True)


def _node_at(node, loc):
    # walk a composed YAML node along a pydantic error location; stop at the
    # key node of the last field found, or at the closest enclosing node
    for depth, key in enumerate(loc):
        if isinstance(node, yaml.MappingNode):
            hit = next(((k, v) for k, v in node.value if k.value == str(key)), None)
            if hit is None:
                return node
            node = hit[0] if depth == len(loc) - 1 else hit[1]
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int) and key < len(node.value):
            node = node.value[key]
        else:
            return node
    return node


def _format_errors(err: ValidationError, root) -> str:
    lines = []
    for e in err.errors():
        loc = tuple(x for x in e["loc"] if not (isinstance(x, str) and x.startswith("function-")))
        field = ".".join(str(x) for x in loc) or "<root>"
        where = ""
        if root is not None:
            node = _node_at(root, loc)
            where = f"line {node.start_mark.line + 1}: "
        lines.append(f"{where}{field}: {e['msg']}")
    return "\n".join(lines)


def parse_config(text: str, source: str = "<string>") -> ScenarioConfig:
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: YAML syntax error: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{source}:\n{_format_errors(exc, root)}") from None


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    cfg = parse_config(text, str(path))
    base = path.parent
    _resolve_paths(cfg.model, base)
    return cfg


def _resolve_paths(m: ModelSection, base: Path):
    for name in ("matrix_file", "k_file"):
        val = getattr(m, name)
        if val is not None and not Path(val).is_absolute():
            setattr(m, name, str(base / val))
    for b in m.blocks or []:
        _resolve_paths(b, base)
