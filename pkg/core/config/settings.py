"""
Numeric Defaults

Typed view of config/defaults.yaml. The file is validated with
validate_defaults_data() and then parsed into pydantic models; a missing file
falls back to the built-in defaults below.
"""

from __future__ import annotations
import logging
import os
from pathlib import Path
from typing import Optional

import yaml
from pydantic import BaseModel, Field, ValidationError

from core.config.validator import validate_defaults_data
from core.errors import ConfigError

logger = logging.getLogger(__name__)

REPO_DEFAULTS = Path(__file__).resolve().parents[2] / "config" / "defaults.yaml"


class SplineDefaults(BaseModel):
    samples: int = Field(401, gt=1)


class ZakDefaults(BaseModel):
    scan: int = Field(256, gt=0)
    eval_grid: int = Field(64, gt=0)
    verify_samples: int = Field(100, gt=0)
    factor_grid: int = Field(32, gt=0)


class OptimalDefaults(BaseModel):
    start: int = Field(128, gt=0)
    max: int = Field(2048, gt=0)
    rel_change: float = Field(1e-4, gt=0.0, lt=1.0)
    highredundancy_grid: int = Field(2049, gt=2)


class DualDefaults(BaseModel):
    grid_points: int = Field(257, ge=2)
    extra_cols: int = Field(0, ge=0)


class SweepDefaults(BaseModel):
    lambda_: float = Field(1.0, gt=0.0, alias="lambda")
    denominator: int = Field(61, gt=1)
    k_min: int = Field(31, gt=0)
    k_max: int = Field(60, gt=0)

    model_config = {"populate_by_name": True}


class Tolerances(BaseModel):
    rate_merge: float = 1e-12
    pinv_rcond: float = 1e-12
    solve_pivot: float = 1e-13
    residual: float = 1e-9
    zak_tail: float = 1e-12


class NumericDefaults(BaseModel):
    """Resolved numeric defaults; every CLI flag falls back to a field here."""
    spline: SplineDefaults = Field(default_factory=SplineDefaults)
    zak: ZakDefaults = Field(default_factory=ZakDefaults)
    optimal: OptimalDefaults = Field(default_factory=OptimalDefaults)
    dual: DualDefaults = Field(default_factory=DualDefaults)
    sweep: SweepDefaults = Field(default_factory=SweepDefaults)
    tolerances: Tolerances = Field(default_factory=Tolerances)
    source: Optional[str] = None


def resolve_defaults_path(path: Optional[str] = None) -> Path:
    if path:
        return Path(path)
    env = os.getenv("GABOR_EB_CONFIG", "").strip()
    if env:
        return Path(env)
    return REPO_DEFAULTS


def load_defaults(path: Optional[str] = None) -> NumericDefaults:
    """
    Load numeric defaults.

    Args:
        path: explicit YAML path; otherwise GABOR_EB_CONFIG, otherwise the repository default.

    Raises:
        ConfigError: the file exists but is malformed or fails validation, or an explicit
            path does not exist.
    """
    p = resolve_defaults_path(path)
    if not p.exists():
        if path:
            raise ConfigError("config file not found", config_path=str(p))
        logger.info("[config] %s not found; using built-in defaults", p)
        return NumericDefaults()

    try:
        with open(p, "r") as f:
            data = yaml.safe_load(f) or {}
    except yaml.YAMLError as e:
        raise ConfigError(f"invalid YAML: {e}", config_path=str(p)) from e
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", config_path=str(p))

    ok, errs = validate_defaults_data(data)
    if not ok:
        raise ConfigError("; ".join(errs), config_path=str(p), context={"errors": errs})

    try:
        cfg = NumericDefaults(**data)
    except ValidationError as e:
        raise ConfigError(str(e), config_path=str(p)) from e
    cfg.source = str(p)
    logger.debug("[config] loaded defaults from %s", p)
    return cfg
