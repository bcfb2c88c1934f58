"""
Prospect Drive - Evaluation
Frame-level predictors (CPT pipeline, TTC baseline, expected-utility ablation) and
success-rate reports.
"""

from collections import defaultdict
from dataclasses import dataclass
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence

import structlog

from .cpt import (
    DrivingUtilities,
    decide,
    decision_probabilities,
    driving_values,
    expected_driving_values,
    yield_probability,
)
from .estimation import CptObservation
from .exceptions import EmptyDatasetError, UnlabeledFrameError
from .features import utility
from .kinematics import SPEED_FLOOR, Frame, ttc
from .models import (
    CptParams,
    Decision,
    EvaluationReport,
    Granularity,
    ModelScore,
    MotionLimits,
    PredictionRecord,
    UtilityConfig,
    WeightingMode,
)
from .observability import get_metrics
from .synthesis import (
    DEFAULT_STOP_OFFSET,
    YieldConstraint,
    compose_pass_nonyield,
    constant_speed_trajectory,
    initial_state,
    optimal_pass_trajectory,
    optimal_yield_trajectory,
)

logger = structlog.get_logger(__name__)

DEFAULT_THRESHOLD = 0.5
DEFAULT_HORIZON = 30

Predictor = Callable[[Frame], float]


# ---------------------------------------------------------------------------
# TTC baseline
# ---------------------------------------------------------------------------

def ttc_probability(
    target_station: float, target_speed: float, interacting_station: float, interacting_speed: float
) -> float:
    """
    Probability that the target arrives first, from the two times to collision.

    Degenerate states: both vehicles stopped or past the crossing give 0.5; a target past the
    crossing gives 1; a stopped target, or an opponent already past, gives 0; an opponent
    stopped before the crossing gives 1.
    """
    target_past = target_station >= 0.0
    target_stopped = not target_past and target_speed <= SPEED_FLOOR
    other_past = interacting_station >= 0.0
    other_stopped = not other_past and interacting_speed <= SPEED_FLOOR

    if (target_past or target_stopped) and (other_past or other_stopped):
        return 0.5
    if target_past:
        return 1.0
    if target_stopped or other_past:
        return 0.0
    if other_stopped:
        return 1.0
    return yield_probability(ttc(target_station, target_speed), ttc(interacting_station, interacting_speed))


def ttc_predict(frame: Frame) -> float:
    """Pr(pass) of the TTC baseline from the last sample of the frame"""
    target = initial_state(frame.target)
    other = initial_state(frame.interacting)
    return ttc_probability(target.station, target.speed, other.station, other.speed)


# ---------------------------------------------------------------------------
# CPT pipeline
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FrameOutcomes:
    """Counterfactual utilities of a frame and the opponent's yield probability"""
    utilities: DrivingUtilities
    raw_utilities: DrivingUtilities
    offset: float
    p_yield: float
    k0: int


@dataclass(frozen=True)
class CptPrediction:
    pr_pass: float
    utilities: DrivingUtilities
    p_yield: float
    v_pass: float
    v_yield: float
    offset: float = 0.0
    k0: int = 0

    @property
    def decision(self) -> Decision:
        return decide(self.v_pass, self.v_yield)


def frame_outcomes(
    frame: Frame,
    theta: Sequence[float],
    cfg_u: UtilityConfig,
    limits: MotionLimits,
    horizon: int = DEFAULT_HORIZON,
    dt: Optional[float] = None,
    stop_offset: float = DEFAULT_STOP_OFFSET,
    clearance_margin: float = 0.0,
    opponent_clearance: float = 0.0,
) -> FrameOutcomes:
    """
    Synthesize the three counterfactual target trajectories and score them.

    Utilities are shifted by a common offset when any is negative.
    """
    step = frame.target.dt if dt is None else dt
    target = initial_state(frame.target)
    other = initial_state(frame.interacting)
    opponent = constant_speed_trajectory(other, horizon, step)

    best_pass = optimal_pass_trajectory(target, theta, cfg_u, limits, horizon, step)
    cut_pass, k0 = compose_pass_nonyield(
        best_pass, opponent, limits, step, clearance_margin, opponent_clearance
    )

    stop = -stop_offset
    if target.station >= 0.0:
        constraint = YieldConstraint.unbounded()
    elif target.station > stop:
        constraint = YieldConstraint(stop_station=target.station, clearance_margin=clearance_margin)
    else:
        constraint = YieldConstraint(stop_station=stop, clearance_margin=clearance_margin)
    wait = optimal_yield_trajectory(target, constraint, theta, cfg_u, limits, horizon, step, opponent)

    raw = DrivingUtilities(
        u_pass_yield=utility(best_pass, None, theta, cfg_u),
        u_pass_nonyield=utility(cut_pass, opponent, theta, cfg_u),
        u_yield=utility(wait, opponent, theta, cfg_u),
    )
    offset = max(0.0, -min(raw.as_tuple()))
    if offset > 0.0:
        logger.warning("gains_only_shift", pair_id=frame.pair_id, start=frame.start, offset=offset)
        get_metrics().gain_shifts.inc()

    p_yield = ttc_probability(target.station, target.speed, other.station, other.speed)
    return FrameOutcomes(raw.shifted(offset), raw, offset, p_yield, k0)


def cpt_predict(
    frame: Frame,
    theta: Sequence[float],
    cfg_u: UtilityConfig,
    cpt_params: CptParams,
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
    limits: Optional[MotionLimits] = None,
    horizon: int = DEFAULT_HORIZON,
    dt: Optional[float] = None,
    stop_offset: float = DEFAULT_STOP_OFFSET,
    clearance_margin: float = 0.0,
    opponent_clearance: float = 0.0,
) -> CptPrediction:
    """Pr(pass) of the CPT driver model with its intermediates"""
    outcomes = frame_outcomes(
        frame, theta, cfg_u, limits or MotionLimits(), horizon, dt, stop_offset, clearance_margin,
        opponent_clearance,
    )
    return prediction_from_outcomes(outcomes, cpt_params, mode)


def prediction_from_outcomes(
    outcomes: FrameOutcomes, cpt_params: CptParams, mode: WeightingMode
) -> CptPrediction:
    v_pass, v_yield = driving_values(outcomes.utilities, outcomes.p_yield, cpt_params, mode)
    pr_pass, _ = decision_probabilities(v_pass, v_yield)
    return CptPrediction(
        pr_pass, outcomes.utilities, outcomes.p_yield, v_pass, v_yield, outcomes.offset, outcomes.k0
    )


def eut_predict(
    frame: Frame,
    theta: Sequence[float],
    cfg_u: UtilityConfig,
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
    limits: Optional[MotionLimits] = None,
    horizon: int = DEFAULT_HORIZON,
    dt: Optional[float] = None,
    stop_offset: float = DEFAULT_STOP_OFFSET,
    clearance_margin: float = 0.0,
    opponent_clearance: float = 0.0,
) -> CptPrediction:
    """Expected-utility ablation: same outcomes, probability-weighted utilities"""
    outcomes = frame_outcomes(
        frame, theta, cfg_u, limits or MotionLimits(), horizon, dt, stop_offset, clearance_margin,
        opponent_clearance,
    )
    v_pass, v_yield = expected_driving_values(outcomes.utilities, outcomes.p_yield, mode)
    pr_pass, _ = decision_probabilities(v_pass, v_yield)
    return CptPrediction(
        pr_pass, outcomes.utilities, outcomes.p_yield, v_pass, v_yield, outcomes.offset, outcomes.k0
    )


def frame_observation(outcomes: FrameOutcomes, frame: Frame) -> CptObservation:
    if frame.label is None:
        raise UnlabeledFrameError(frame.pair_id, frame.start)
    return CptObservation(outcomes.utilities, outcomes.p_yield, Decision(frame.label))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def predicted_decision(pr_pass: float, threshold: float = DEFAULT_THRESHOLD) -> Decision:
    return Decision.PASS if pr_pass > threshold else Decision.YIELD


def predict_records(
    predictor: Predictor, frames: Iterable[Frame], model: str, threshold: float = DEFAULT_THRESHOLD
) -> List[PredictionRecord]:
    records = []
    for frame in frames:
        pr_pass = float(predictor(frame))
        records.append(
            PredictionRecord(
                pair_id=frame.pair_id,
                frame_index=frame.start,
                model=model,
                pr_pass=pr_pass,
                predicted=predicted_decision(pr_pass, threshold),
                label=frame.label,
            )
        )
    return records


def _pair_votes(records: Sequence[PredictionRecord]) -> List[PredictionRecord]:
    """Majority vote of frame predictions per pair; ties count as yield"""
    grouped: Dict[str, List[PredictionRecord]] = defaultdict(list)
    for record in records:
        grouped[record.pair_id].append(record)
    votes = []
    for pair_id, members in grouped.items():
        passes = sum(1 for r in members if r.predicted is Decision.PASS)
        decision = Decision.PASS if passes * 2 > len(members) else Decision.YIELD
        votes.append(
            PredictionRecord(
                pair_id=pair_id,
                frame_index=0,
                model=members[0].model,
                pr_pass=passes / len(members),
                predicted=decision,
                label=members[0].label,
            )
        )
    return votes


def _score(records: Sequence[PredictionRecord]) -> ModelScore:
    confusion = [[0, 0], [0, 0]]
    order = {Decision.PASS: 0, Decision.YIELD: 1}
    for record in records:
        confusion[order[record.label]][order[record.predicted]] += 1
    total = len(records)
    correct = confusion[0][0] + confusion[1][1]
    return ModelScore(success_rate=correct / total, confusion=confusion, sample_count=total)


def summarize(
    records: Sequence[PredictionRecord],
    threshold: float = DEFAULT_THRESHOLD,
    granularity: Granularity = Granularity.FRAME,
    config: Optional[Dict[str, Any]] = None,
) -> EvaluationReport:
    """Success rate and confusion matrix per model"""
    if not records:
        raise EmptyDatasetError("prediction set")
    by_model: Dict[str, List[PredictionRecord]] = defaultdict(list)
    for record in records:
        if record.label is None:
            raise UnlabeledFrameError(record.pair_id, record.frame_index)
        decided = record.model_copy(update={"predicted": predicted_decision(record.pr_pass, threshold)})
        by_model[record.model].append(decided)

    granularity = Granularity(granularity)
    scores = {}
    for model, members in by_model.items():
        units = _pair_votes(members) if granularity is Granularity.PAIR else members
        scores[model] = _score(units)

    sample_count = next(iter(scores.values())).sample_count
    report = EvaluationReport(
        granularity=granularity,
        threshold=threshold,
        sample_count=sample_count,
        models=scores,
        config=dict(config or {}),
    )
    logger.info(
        "evaluation_complete",
        granularity=granularity.value,
        samples=sample_count,
        success_rates={m: s.success_rate for m, s in scores.items()},
    )
    return report


def evaluate(
    predictor: Predictor,
    frames: Sequence[Frame],
    threshold: float = DEFAULT_THRESHOLD,
    model: str = "model",
    granularity: Granularity = Granularity.FRAME,
    config: Optional[Dict[str, Any]] = None,
) -> EvaluationReport:
    """Run a predictor over labeled frames and score it"""
    for frame in frames:
        if frame.label is None:
            raise UnlabeledFrameError(frame.pair_id, frame.start)
    with get_metrics().measure(f"evaluate_{model}"):
        records = predict_records(predictor, frames, model, threshold)
    return summarize(records, threshold, granularity, config)


def format_table(report: EvaluationReport) -> str:
    """Plain-text success-rate table, one column per model"""
    names = [name.upper() for name in report.models]
    rates = [f"{score.success_rate * 100:.2f}%" for score in report.models.values()]
    label_width = len("Success rates")
    widths = [max(len(n), len(r)) for n, r in zip(names, rates)]

    def row(label: str, cells: List[str]) -> str:
        padded = [cell.ljust(width) for cell, width in zip(cells, widths)]
        return "| " + " | ".join([label.ljust(label_width)] + padded) + " |"

    rule = "|-" + "-|-".join(["-" * label_width] + ["-" * w for w in widths]) + "-|"
    lines = [row("Model", names), rule, row("Success rates", rates)]
    lines.append(
        f"({report.granularity.value}-level, {report.sample_count} samples, threshold {report.threshold:g})"
    )
    return "\n".join(lines)
