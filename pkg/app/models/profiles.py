"""
Experiment profiles: full-scale "full" and reduced "desk"
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import ValidationError

from ..core.errors import ConfigError
from .schemas import ExperimentConfig

logger = logging.getLogger(__name__)

DESK_SCALE = 0.5


def full_profile() -> ExperimentConfig:
    return ExperimentConfig(profile="full")


def desk_profile() -> ExperimentConfig:
    """Half-size ship in a 400 × 80 m channel, same ice distribution truncated to [2, 40] m"""
    s = DESK_SCALE
    return ExperimentConfig.model_validate({
        "profile": "desk",
        "channel": {"length": 400.0, "width": 80.0},
        "ship": {"length": 76.2 * s, "width": 18.0 * s, "bow_length": 15.0 * s, "mass": 6.0e6 * s ** 3},
        "ice": {"min_width": 2.0, "max_width": 40.0},
        "costmap": {"resolution": 1.0, "kernel_size": 51},
        "lattice": {"spacing": 15.0, "r_min": 75.0},
        "optimizer": {"ds": 2.0, "body_point_spacing": 3.0, "smoothness_weight": 5.0e4 * s ** 5},
        "nav": {"horizon": 250.0, "replan_interval": 15.0, "alpha": 6.0e-8},
        "trial": {"start_offset": 50.0, "vessel_scale": s},
    })


PROFILES = {
    "full": full_profile,
    "desk": desk_profile,
}


def deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_profile(name: str, overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Named profile with optional nested overrides"""
    if name not in PROFILES:
        raise ConfigError(f"Unknown profile '{name}', expected one of {sorted(PROFILES)}")
    config = PROFILES[name]()
    if not overrides:
        return config
    try:
        return ExperimentConfig.model_validate(deep_merge(config.model_dump(), overrides))
    except ValidationError as e:
        logger.error(f"Failed to apply overrides to profile '{name}': {e}")
        raise ConfigError(str(e)) from e


def load_config_file(path: Optional[str], profile: str) -> ExperimentConfig:
    """Profile defaults merged with a partial JSON config file"""
    overrides: Dict[str, Any] = {}
    if path:
        try:
            overrides = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Cannot read config file {path}: {e}") from e
        profile = overrides.pop("profile", profile)
    return load_profile(profile, overrides)
