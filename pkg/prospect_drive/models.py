"""
Prospect Drive - Data Models
Pydantic models for configuration sections, CPT parameters and serialized results.
"""

from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .exceptions import ValidationError


class Decision(str, Enum):
    """Target-vehicle decision"""
    PASS = "pass"
    YIELD = "yield"

    def flipped(self) -> "Decision":
        return Decision.YIELD if self is Decision.PASS else Decision.PASS


class WeightingMode(str, Enum):
    """How the two pass outcomes receive decision weights"""
    PAPER_EXACT = "paper_exact"
    RANK_ORDERED = "rank_ordered"


class ValuationMode(str, Enum):
    CPT = "cpt"
    EUT = "eut"


class LabelNoise(str, Enum):
    """How the synthetic generator turns decision probabilities into labels"""
    SOFTMAX_SAMPLE = "softmax_sample"
    ARGMAX = "argmax"


class Granularity(str, Enum):
    FRAME = "frame"
    PAIR = "pair"


class UtilityConfig(BaseModel):
    """Nominal speed and per-feature length-scales of the exponential features"""
    model_config = ConfigDict(frozen=True)

    v_traffic: float = Field(8.0, gt=0, description="Nominal traffic speed (m/s)")
    speed_scale: float = Field(3.0, gt=0, description="Length-scale of the speed feature (m/s)")
    accel_scale: float = Field(2.0, gt=0, description="Length-scale of the acceleration feature (m/s^2)")
    jerk_scale: float = Field(5.0, gt=0, description="Length-scale of the jerk feature (m/s^3)")
    gap_scale: float = Field(10.0, gt=0, description="Length-scale of the proximity feature (m)")


class MotionLimits(BaseModel):
    """Longitudinal acceleration and speed bounds"""
    model_config = ConfigDict(frozen=True)

    a_min: float = Field(-5.0, lt=0, description="Most negative acceleration (m/s^2)")
    a_max: float = Field(3.0, gt=0, description="Largest acceleration (m/s^2)")
    v_max: float = Field(20.0, gt=0, description="Speed cap (m/s)")


class CptParams(BaseModel):
    """
    Value and weighting function parameters.

    ``beta`` defaults to ``alpha`` and ``delta`` to ``gamma``. ``lam`` is serialized as
    ``lambda``.
    """
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    alpha: float = Field(1.0, gt=0, le=1, description="Curvature over gains")
    beta: float = Field(1.0, gt=0, le=1, description="Curvature over losses")
    gamma: float = Field(1.0, gt=0, le=1, description="Gain weighting exponent")
    delta: float = Field(1.0, gt=0, le=1, description="Loss weighting exponent")
    lam: float = Field(1.0, ge=1, alias="lambda", description="Loss aversion")
    u0: float = Field(0.0, description="Reference utility")

    @model_validator(mode="before")
    @classmethod
    def _mirror_defaults(cls, data: Any) -> Any:
        if isinstance(data, dict):
            data = dict(data)
            if data.get("beta") is None and data.get("alpha") is not None:
                data["beta"] = data["alpha"]
            if data.get("delta") is None and data.get("gamma") is not None:
                data["delta"] = data["gamma"]
            data = {k: v for k, v in data.items() if v is not None}
        return data

    @classmethod
    def driving(cls, alpha: float, gamma: float) -> "CptParams":
        """Gains-only parameters of the driving model (u0 = 0, lambda = 1)"""
        return cls(alpha=alpha, gamma=gamma)

    @property
    def is_expected_utility(self) -> bool:
        return self.alpha == self.beta == self.gamma == self.delta == self.lam == 1.0


class IrlConfig(BaseModel):
    """Candidate generation and ascent settings for the utility-weight fit"""
    candidate_count: int = Field(64, gt=0, description="Perturbed candidates per demonstration")
    perturbation_scale: float = Field(1.0, gt=0, description="Acceleration noise std-dev (m/s^2)")
    smoothing_window: int = Field(5, gt=0, description="Moving-average width for noise")
    learning_rate: float = Field(1.0, gt=0, description="Initial step of the line search")
    max_iterations: int = Field(200, gt=0)
    gradient_tolerance: float = Field(1e-4, gt=0, description="Infinity-norm stopping tolerance")
    rng_seed: int = 0


class SynthConfig(BaseModel):
    """Synthetic interaction generator with a ground-truth CPT agent"""
    n_pairs: int = Field(200, ge=1)
    rng_seed: int = 0
    theta: List[float] = Field(default_factory=lambda: [1.0, 0.5, 0.2, -1.0])
    alpha: float = Field(0.9827, gt=0, le=1)
    gamma: float = Field(0.6742, gt=0, le=1)
    target_station_range: Tuple[float, float] = (-40.0, -15.0)
    interacting_station_range: Tuple[float, float] = (-40.0, -15.0)
    target_speed_range: Tuple[float, float] = (4.0, 12.0)
    interacting_speed_range: Tuple[float, float] = (4.0, 12.0)
    accel_range: Tuple[float, float] = (-1.0, 1.0)
    samples: int = Field(10, ge=2, description="Samples per generated pair")
    dt: float = Field(0.1, gt=0)
    horizon: int = Field(30, ge=2, description="Prediction horizon used for labeling")
    label_noise: LabelNoise = LabelNoise.SOFTMAX_SAMPLE
    mode: WeightingMode = WeightingMode.PAPER_EXACT
    history_candidates: int = Field(
        16, ge=1, description="Perturbed target histories chosen among by utility; 1 keeps the rollout"
    )
    history_noise: float = Field(
        1.0, gt=0, description="Acceleration noise std-dev of history perturbations (m/s^2)"
    )
    balanced: bool = Field(True, description="Fill equal pass and yield quotas by the model's decision")
    max_draws: int = Field(4, ge=1, description="Draws allowed per requested pair while filling quotas")

    @field_validator("theta")
    @classmethod
    def _four_weights(cls, value: List[float]) -> List[float]:
        if len(value) != 4:
            raise ValueError("theta must have exactly 4 weights")
        return value

    @field_validator(
        "target_station_range",
        "interacting_station_range",
        "target_speed_range",
        "interacting_speed_range",
        "accel_range",
    )
    @classmethod
    def _ordered_range(cls, value: Tuple[float, float]) -> Tuple[float, float]:
        low, high = value
        if not low <= high:
            raise ValueError(f"range ({low}, {high}) is empty")
        return value


class FitResult(BaseModel):
    """Outcome of an IRL or CPT fit; serialized as the theta/cpt JSON files"""
    theta: Optional[List[float]] = Field(None, description="Utility weights (IRL fits)")
    alpha: Optional[float] = Field(None, description="Value curvature (CPT fits)")
    gamma: Optional[float] = Field(None, description="Weighting exponent (CPT fits)")
    loss: float = Field(..., description="Final objective value (lower is better)")
    converged: bool
    trace: List[float] = Field(default_factory=list, description="Loss after each accepted step")
    iterations: int = 0
    mode: Optional[WeightingMode] = None
    train_pairs: Optional[List[str]] = None
    test_pairs: Optional[List[str]] = None

    def cpt_params(self) -> CptParams:
        if self.alpha is None or self.gamma is None:
            raise ValidationError("fit result carries no CPT parameters", field="cpt")
        return CptParams.driving(self.alpha, self.gamma)


class PredictionRecord(BaseModel):
    """One model prediction for one frame"""
    pair_id: str
    frame_index: int = Field(0, ge=0, description="Start sample of the frame in its pair")
    model: str
    pr_pass: float = Field(..., ge=0, le=1)
    predicted: Decision
    label: Optional[Decision] = None

    @property
    def correct(self) -> bool:
        return self.label is not None and self.predicted == self.label


class ModelScore(BaseModel):
    """Success rate and confusion matrix of one model"""
    success_rate: float
    # rows: true pass / yield, columns: predicted pass / yield
    confusion: List[List[int]]
    sample_count: int


class EvaluationReport(BaseModel):
    """Per-model success rates, serialized to report.json"""
    granularity: Granularity
    threshold: float
    sample_count: int
    models: Dict[str, ModelScore] = Field(default_factory=dict)
    config: Dict[str, Any] = Field(default_factory=dict, description="Echo of the evaluation setup")
