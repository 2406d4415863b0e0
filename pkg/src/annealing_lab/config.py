"""Experiment configuration schemas.

Config files are YAML or JSON mappings. Unknown keys are rejected.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import SchemaError


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class InstanceConfig(_Strict):
    kind: Literal["random", "ferromagnet", "explicit", "file"] = "random"
    n: Optional[int] = Field(default=None, ge=1)
    seed: int = 0
    h: Optional[list[float]] = None
    J: Optional[list[list[float]]] = None
    coupling: float = -0.5
    field: float = 0.0
    path: Optional[str] = None


class ScheduleConfig(_Strict):
    kind: Literal["sa_log", "linear"] = "sa_log"
    c: float = 1.5
    start: float = 0.0
    end: float = 1.0


class _Base(_Strict):
    seed: int = 0
    out: str = "runs"


class MapConfig(_Base):
    instance: InstanceConfig = InstanceConfig(n=4)
    betas: list[float] = [0.0, 0.5, 1.0, 2.0, 4.0]
    dump_operator: bool = False


class SpectrumConfig(_Base):
    instance: InstanceConfig = InstanceConfig(n=4)
    betas: list[float] = [0.0, 0.5, 1.0, 2.0, 4.0]


class SAConfig(_Base):
    instance: InstanceConfig = InstanceConfig(kind="ferromagnet", n=8)
    schedule: ScheduleConfig = ScheduleConfig()
    sweeps: int = Field(default=500, ge=0)
    runs: int = Field(default=10, ge=1)
    record_every: int = Field(default=1, ge=1)


class AnnealConfig(_Base):
    instance: InstanceConfig = InstanceConfig(n=3)
    mode: Literal["transverse", "zeno"] = "transverse"
    total_times: list[float] = [1.0, 10.0, 100.0]
    gamma_start: float = 2.0
    gamma_end: float = 0.0
    beta_final: float = 2.0
    steps: Optional[int] = None
    c3: float = 6.283185307179586
    runs: int = Field(default=10, ge=1)
    max_dt: float = Field(default=0.05, gt=0)


class AmplifyConfig(_Base):
    instance: InstanceConfig = InstanceConfig(n=3)
    beta: float = Field(default=1.0, ge=0)
    delta_factor: float = Field(default=1.0, gt=0)
    dump_operator: bool = False


class GluedTreesConfig(_Base):
    action: Literal["generate", "profile", "run", "scaling"] = "profile"
    depths: list[int] = [4]
    alpha: float = 0.3535533905932738
    total_times: list[float] = [10.0, 100.0, 1000.0]
    initial: Literal["entrance", "randomized_manifold"] = "entrance"
    max_dt: float = Field(default=0.5, gt=0)

    @field_validator("depths")
    @classmethod
    def _depth_range(cls, v):
        if not v or any(not 1 <= d <= 14 for d in v):
            raise ValueError("depths must lie in [1, 14]")
        return v


class GroverConfig(_Base):
    n_values: list[int] = [4, 5, 6, 7, 8]
    beta: Optional[float] = None
    sign: Literal[-1, 1] = -1
    amplified: bool = True


class Max2SatConfig(_Base):
    path: Optional[str] = None
    n: int = Field(default=4, ge=1)
    clauses: int = Field(default=6, ge=1)
    total_times: list[float] = [0.0, 1.0, 5.0, 20.0]
    max_dt: float = Field(default=0.05, gt=0)


class PlotDataConfig(_Base):
    run_dir: str = "runs"


SCHEMAS: dict[str, type[_Base]] = {
    "map": MapConfig,
    "spectrum": SpectrumConfig,
    "sa": SAConfig,
    "anneal": AnnealConfig,
    "amplify": AmplifyConfig,
    "gluedtrees": GluedTreesConfig,
    "grover": GroverConfig,
    "max2sat": Max2SatConfig,
    "plotdata": PlotDataConfig,
}


def load_config_file(path: str | Path | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text())
    except yaml.YAMLError as exc:
        raise SchemaError(f"{path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise SchemaError(f"{path}: top level must be a mapping")
    return data


def _set_dotted(d: dict, key: str, value: Any) -> None:
    parts = key.split(".")
    for p in parts[:-1]:
        d = d.setdefault(p, {})
        if not isinstance(d, dict):
            raise SchemaError(f"cannot set {key}: {p} is not a mapping")
    d[parts[-1]] = value


def resolve_config(command: str, file_data: dict[str, Any], overrides: dict[str, Any]) -> _Base:
    """Merge file values with flag overrides (flags win) and validate."""
    data = {k: v for k, v in file_data.items()}
    for k, v in overrides.items():
        if v is not None:
            _set_dotted(data, k, v)
    try:
        return SCHEMAS[command].model_validate(data)
    except ValidationError as exc:
        raise SchemaError(str(exc)) from exc
