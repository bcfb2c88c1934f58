"""
Prospect Drive - Configuration
YAML pipeline configuration validated into pydantic models, with environment overrides.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import structlog
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, Field

from .exceptions import ValidationError
from .models import IrlConfig, MotionLimits, SynthConfig, UtilityConfig, WeightingMode

logger = structlog.get_logger(__name__)

SEED_ENV = "PROSPECT_DRIVE_SEED"


class CptFitConfig(BaseModel):
    """Settings of the CPT parameter fit"""
    mode: WeightingMode = WeightingMode.PAPER_EXACT
    grid_resolution: int = Field(20, ge=2, description="Grid points per axis on (0, 1]")
    test_fraction: float = Field(0.0, ge=0, lt=1, description="Share of pairs held out of the fit")
    split_seed: int = 0


class PipelineConfig(BaseModel):
    """Every tunable of the pipeline; missing keys take their defaults"""
    seed: int = 0
    dt: float = Field(0.1, gt=0, description="Sampling interval (s)")
    window: int = Field(10, ge=2, description="Frame length in samples")
    stride: int = Field(1, ge=1, description="Frame stride in samples")
    horizon: int = Field(30, ge=2, description="Planning horizon in samples")
    stop_offset: float = Field(3.0, gt=0, description="Yield stop distance before the crossing (m)")
    clearance_margin: float = Field(0.0, ge=0, description="Extra stop margin (m)")
    opponent_clearance: float = Field(
        0.0, ge=0, description="Station past the crossing at which the opponent has cleared it (m)"
    )
    utility: UtilityConfig = Field(default_factory=UtilityConfig)
    limits: MotionLimits = Field(default_factory=MotionLimits)
    irl: IrlConfig = Field(default_factory=IrlConfig)
    synth: SynthConfig = Field(default_factory=SynthConfig)
    cpt: CptFitConfig = Field(default_factory=CptFitConfig)

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Copy with every seed replaced"""
        return self.model_copy(
            update={
                "seed": seed,
                "irl": self.irl.model_copy(update={"rng_seed": seed}),
                "synth": self.synth.model_copy(update={"rng_seed": seed}),
                "cpt": self.cpt.model_copy(update={"split_seed": seed}),
            }
        )


def _seed_override() -> Optional[int]:
    raw = os.getenv(SEED_ENV)
    if raw is None or not raw.strip():
        return None
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}", field=SEED_ENV) from None


_SECTION_SEEDS = (("irl", "rng_seed"), ("synth", "rng_seed"), ("cpt", "split_seed"))


def _inherit_seed(config: PipelineConfig, data: Dict[str, Any]) -> PipelineConfig:
    """Sections without an explicit seed take the top-level one"""
    update = {}
    for section, key in _SECTION_SEEDS:
        if key not in (data.get(section) or {}):
            update[section] = getattr(config, section).model_copy(update={key: config.seed})
    return config.model_copy(update=update)


def load_config(path: Optional[Union[str, Path]] = None) -> PipelineConfig:
    """
    Load a pipeline configuration.

    A ``.env`` file is read first; ``PROSPECT_DRIVE_SEED`` then overrides every seed.
    Without a path the defaults are used.
    """
    load_dotenv()
    data: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, "r") as f:
                data = yaml.safe_load(f) or {}
        except FileNotFoundError:
            raise ValidationError(f"config file not found: {path}", field="config") from None
        except yaml.YAMLError as e:
            raise ValidationError(f"config file {path} is not valid YAML: {e}", field="config") from None
        if not isinstance(data, dict):
            raise ValidationError(f"config file {path} must hold a mapping", field="config")

    config = PipelineConfig.model_validate(data)
    if "seed" in data:
        config = _inherit_seed(config, data)
    seed = _seed_override()
    if seed is not None:
        config = config.with_seed(seed)
        logger.info("seed_overridden", seed=seed, source=SEED_ENV)
    return config
