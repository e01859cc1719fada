"""Pipeline configuration as a JSON document.

Schema: a JSON object whose keys are section names; each section is an object
of field overrides. Sections and their fields:

- ``rules``: RuleConfig fields
- ``features``: FeatureParams fields
- ``ground``: GroundParams fields
- ``smooth``: SmoothParams fields
- ``icp_pass1``, ``icp_pass2``, ``icp_ground``: IcpParams fields
- ``fusion``: buffer, footprint_cell, border_width, semantic, precrop_pass1
- ``stages``: roof_stages (list), ground_postprocess, smooth, clean (booleans)

Omitted sections and fields keep their defaults. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .features import FeatureParams
from .fusion import FusionConfig, IcpParams
from .rulepipe import STAGES, RuleConfig
from .segment import GroundParams, SmoothParams


@dataclass(frozen=True)
class FusionOptions:
    buffer: float = 20.0
    footprint_cell: float = 5.0
    border_width: float = 15.0
    semantic: bool = True
    precrop_pass1: bool = False

    def __post_init__(self):
        if self.buffer < 0 or self.footprint_cell <= 0 or self.border_width <= 0:
            raise ValueError("buffer must be >= 0; footprint_cell and border_width > 0")


@dataclass(frozen=True)
class StageFlags:
    roof_stages: tuple = STAGES
    ground_postprocess: bool = True
    smooth: bool = False
    clean: bool = False

    def __post_init__(self):
        stages = tuple(self.roof_stages)
        if not stages or stages != STAGES[:len(stages)]:
            raise ValueError(f"roof_stages must be a non-empty prefix of {list(STAGES)}")


DEFAULTS = {
    "rules": RuleConfig(),
    "features": FeatureParams(),
    "ground": GroundParams(),
    "smooth": SmoothParams(),
    "icp_pass1": IcpParams(),
    "icp_pass2": IcpParams(max_correspondence_dist=2.0),
    "icp_ground": IcpParams(max_correspondence_dist=2.0),
    "fusion": FusionOptions(),
    "stages": StageFlags(),
}


@dataclass(frozen=True)
class PipelineConfig:
    rules: RuleConfig = DEFAULTS["rules"]
    features: FeatureParams = DEFAULTS["features"]
    ground: GroundParams = DEFAULTS["ground"]
    smooth: SmoothParams = DEFAULTS["smooth"]
    icp_pass1: IcpParams = DEFAULTS["icp_pass1"]
    icp_pass2: IcpParams = DEFAULTS["icp_pass2"]
    icp_ground: IcpParams = DEFAULTS["icp_ground"]
    fusion: FusionOptions = DEFAULTS["fusion"]
    stages: StageFlags = field(default=DEFAULTS["stages"])

    def fusion_config(self, semantic: bool | None = None) -> FusionConfig:
        f = self.fusion
        return FusionConfig(
            buffer=f.buffer, footprint_cell=f.footprint_cell, border_width=f.border_width,
            semantic=f.semantic if semantic is None else semantic, precrop_pass1=f.precrop_pass1,
            icp_pass1=self.icp_pass1, icp_pass2=self.icp_pass2, icp_ground=self.icp_ground,
            ground=self.ground)

    def to_dict(self) -> dict:
        out = {}
        for name in DEFAULTS:
            sec = dataclasses.asdict(getattr(self, name))
            out[name] = {k: list(v) if isinstance(v, tuple) else v for k, v in sec.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


def _coerce(section: str, f: dataclasses.Field, default, value):
    where = f"{section}.{f.name}"
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{where}: expected a list of strings")
        return tuple(value)
    raise ConfigError(f"{where}: unsupported field")


def config_from_dict(data: dict) -> PipelineConfig:
    if not isinstance(data, dict):
        raise ConfigError("config document must be a JSON object")
    unknown = sorted(set(data) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config sections: {unknown}")
    sections = {}
    for name, overrides in data.items():
        base = DEFAULTS[name]
        if not isinstance(overrides, dict):
            raise ConfigError(f"section {name!r} must be an object")
        fields = {f.name: f for f in dataclasses.fields(base)}
        bad = sorted(set(overrides) - set(fields))
        if bad:
            raise ConfigError(f"unknown keys in {name!r}: {bad}")
        kw = {k: _coerce(name, fields[k], getattr(base, k), v) for k, v in overrides.items()}
        try:
            sections[name] = dataclasses.replace(base, **kw)
        except ValueError as exc:
            raise ConfigError(f"section {name!r}: {exc}") from exc
    return PipelineConfig(**sections)


def load_config(path) -> PipelineConfig:
    try:
        data = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)
