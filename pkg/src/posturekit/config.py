"""One YAML config file drives every tunable; CLI flags override dotted keys.

Example::

    cpd:
      window_width: 1800
      min_seg_len: 450
      penalty: MBIC
    stage2:
      alpha: 0.05
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import yaml

from .changepoint import CpdConfig
from .core import DataError
from .forest import ForestConfig
from .pipeline import PostConfig
from .stage2 import Stage2Config


@dataclass(frozen=True)
class NonwearConfig:
    window_min: int = 90
    tolerance_min: int = 2
    guard_min: int = 30
    epsilon: float = 1e-3


@dataclass(frozen=True)
class IoConfig:
    max_gap_s: float = 3600.0
    resolution_s: float = 0.1
    jobs: int = 1


@dataclass(frozen=True)
class AppConfig:
    nonwear: NonwearConfig = field(default_factory=NonwearConfig)
    cpd: CpdConfig = field(default_factory=CpdConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    post: PostConfig = field(default_factory=PostConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    io: IoConfig = field(default_factory=IoConfig)


_SECTIONS = {
    "nonwear": NonwearConfig,
    "cpd": CpdConfig,
    "stage2": Stage2Config,
    "post": PostConfig,
    "forest": ForestConfig,
    "io": IoConfig,
}

_FIELD_TYPES = {
    ("cpd", "penalty"): None,  # str or number, validated by CpdConfig
    ("forest", "mtry"): Optional[int],
    ("forest", "max_depth"): Optional[int],
}


def _coerce(section: str, key: str, value, current):
    if (section, key) in _FIELD_TYPES:
        if value in ("none", "None", None):
            return None
        if section == "cpd" and key == "penalty":
            try:
                return float(value)
            except (TypeError, ValueError):
                return str(value)
        return int(value)
    if isinstance(current, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return str(value)


def load_config(path=None, overrides: tuple = ()) -> AppConfig:
    """Load config from YAML (all keys optional) and apply ``section.key=value``
    override strings; unknown keys are rejected."""
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise DataError("config file must contain a mapping")

    for item in overrides:
        if "=" not in item:
            raise DataError(f"override must look like section.key=value: {item!r}")
        dotted, value = item.split("=", 1)
        if "." not in dotted:
            raise DataError(f"override key must be dotted: {dotted!r}")
        section, key = dotted.split(".", 1)
        raw.setdefault(section, {})[key] = value

    kwargs = {}
    for section, values in raw.items():
        if section not in _SECTIONS:
            raise DataError(f"unknown config section {section!r}")
        cls = _SECTIONS[section]
        defaults = cls()
        if not isinstance(values, dict):
            raise DataError(f"config section {section!r} must be a mapping")
        sect_kwargs = {}
        for key, value in values.items():
            if not hasattr(defaults, key):
                raise DataError(f"unknown config key {section}.{key}")
            sect_kwargs[key] = _coerce(section, key, value, getattr(defaults, key))
        kwargs[section] = cls(**sect_kwargs)
    return AppConfig(**kwargs)
