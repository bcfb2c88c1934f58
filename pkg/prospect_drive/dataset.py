"""
Prospect Drive - Datasets
CSV ingestion and export, Cartesian-to-Frenet conversion, the synthetic interaction
generator and curve tables for plotting.
"""

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import structlog
from scipy.special import softmax

from .cpt import value_fn, weighting_fn
from .estimation import Demonstration, generate_candidates
from .evaluation import FrameOutcomes, frame_outcomes, prediction_from_outcomes
from .exceptions import (
    EmptyDatasetError,
    InconsistentPairError,
    ParseError,
    SchemaError,
    ValidationError,
)
from .features import summed_features
from .geometry import ReferencePath, find_crossing, project_to_path, to_shared_frenet
from .kinematics import Frame, InteractionPair, Trajectory, slice_frames
from .models import (
    CptParams,
    Decision,
    IrlConfig,
    LabelNoise,
    MotionLimits,
    PredictionRecord,
    SynthConfig,
    UtilityConfig,
)
from .observability import get_metrics, monitored
from .synthesis import DEFAULT_STOP_OFFSET

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

TRAJECTORY_COLUMNS = ("pair_id", "role", "t_s", "station_m", "lateral_m")
LABEL_COLUMNS = ("pair_id", "decision")
PATH_COLUMNS = ("path_id", "seq", "x_m", "y_m")
CARTESIAN_COLUMNS = ("pair_id", "role", "t_s", "x_m", "y_m")
ROLES = ("target", "interacting")
CURVE_COLUMNS = ("p", "w_plus", "w_minus", "u", "v")
PREDICTION_COLUMNS = ("pair_id", "frame_index", "model", "pr_pass", "predicted")

TRAJECTORIES_FILE = "trajectories.csv"
LABELS_FILE = "labels.csv"

# Sampling intervals agreeing to this tolerance count as uniform (s)
DT_TOLERANCE = 1e-6


@dataclass(eq=False)
class TrajectoryDataset:
    """Interaction pairs sharing one sampling interval"""
    pairs: List[InteractionPair]
    dt: float
    source: str = ""
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        ids = [pair.pair_id for pair in self.pairs]
        if len(set(ids)) != len(ids):
            duplicate = next(i for i in ids if ids.count(i) > 1)
            raise InconsistentPairError(duplicate, "pair_id appears more than once")
        for pair in self.pairs:
            if abs(pair.dt - self.dt) > 1e-9:
                raise InconsistentPairError(pair.pair_id, f"dt {pair.dt} differs from dataset dt {self.dt}")

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def pair_ids(self) -> List[str]:
        return [pair.pair_id for pair in self.pairs]

    @property
    def labels(self) -> Dict[str, Decision]:
        return {pair.pair_id: pair.label for pair in self.pairs if pair.label is not None}

    @property
    def sample_count(self) -> int:
        return sum(len(pair) for pair in self.pairs)

    def subset(self, pair_ids: Iterable[str]) -> "TrajectoryDataset":
        wanted = set(pair_ids)
        return TrajectoryDataset([p for p in self.pairs if p.pair_id in wanted], self.dt, self.source)

    def frames(self, window: int, stride: int = 1) -> List[Frame]:
        return [frame for pair in self.pairs for frame in slice_frames(pair, window, stride)]


# ---------------------------------------------------------------------------
# CSV helpers
# ---------------------------------------------------------------------------

def _read_table(path: PathLike, required: Sequence[str]) -> pd.DataFrame:
    """Read a CSV as text, checking the header"""
    source = str(path)
    table = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    table.columns = [c.strip() for c in table.columns]
    for column in required:
        if column not in table.columns:
            raise SchemaError(source, column)
    return table


def _parse_floats(table: pd.DataFrame, column: str, source: str) -> np.ndarray:
    values = np.empty(len(table))
    for i, text in enumerate(table[column]):
        try:
            value = float(text)
        except ValueError:
            # header is line 1
            raise ParseError(source, i + 2, column, text) from None
        if not math.isfinite(value):
            raise ParseError(source, i + 2, column, text)
        values[i] = value
    return values


def _check_choices(table: pd.DataFrame, column: str, choices: Sequence[str], source: str) -> None:
    for i, text in enumerate(table[column]):
        if text not in choices:
            raise ParseError(source, i + 2, column, text)


def _format_float(value: float) -> str:
    return repr(float(value))


def _sampling_interval(pair_id: str, role: str, times: np.ndarray) -> float:
    if len(times) < 2:
        raise InconsistentPairError(pair_id, f"{role} has fewer than 2 samples")
    steps = np.diff(times)
    if np.any(steps <= 0) or np.any(np.abs(steps - steps[0]) > DT_TOLERANCE):
        raise InconsistentPairError(pair_id, f"{role} is not uniformly sampled")
    return round(float(np.median(steps)), 9)


def _assemble_pairs(
    pair_ids: np.ndarray,
    roles: np.ndarray,
    times: np.ndarray,
    stations: np.ndarray,
    laterals: np.ndarray,
    labels: Dict[str, Decision],
) -> List[InteractionPair]:
    pairs = []
    for pair_id in pd.unique(pair_ids):
        in_pair = pair_ids == pair_id
        trajectories = {}
        for role in ROLES:
            mask = in_pair & (roles == role)
            if not mask.any():
                raise InconsistentPairError(pair_id, f"no {role} samples")
            order = np.argsort(times[mask], kind="stable")
            dt = _sampling_interval(pair_id, role, times[mask][order])
            trajectories[role] = Trajectory(stations[mask][order], dt, laterals[mask][order])
        pairs.append(
            InteractionPair(
                pair_id=str(pair_id),
                target=trajectories["target"],
                interacting=trajectories["interacting"],
                label=labels.get(pair_id),
            )
        )
    return pairs


def _dataset(pairs: List[InteractionPair], source: str) -> TrajectoryDataset:
    if not pairs:
        raise EmptyDatasetError(f"dataset {source}")
    return TrajectoryDataset(pairs=pairs, dt=pairs[0].dt, source=source)


# ---------------------------------------------------------------------------
# Loading and saving
# ---------------------------------------------------------------------------

def load_labels(labels_csv: PathLike) -> Dict[str, Decision]:
    source = str(labels_csv)
    table = _read_table(labels_csv, LABEL_COLUMNS)
    _check_choices(table, "decision", [d.value for d in Decision], source)
    return {pair_id: Decision(decision) for pair_id, decision in zip(table["pair_id"], table["decision"])}


@monitored("load_dataset")
def load_dataset(trajectory_csv: PathLike, labels_csv: Optional[PathLike] = None) -> TrajectoryDataset:
    """Load Frenet trajectories and optional labels, validating every pair"""
    source = str(trajectory_csv)
    table = _read_table(trajectory_csv, TRAJECTORY_COLUMNS)
    _check_choices(table, "role", ROLES, source)
    times = _parse_floats(table, "t_s", source)
    stations = _parse_floats(table, "station_m", source)
    laterals = _parse_floats(table, "lateral_m", source)

    labels = load_labels(labels_csv) if labels_csv is not None else {}
    pair_ids = table["pair_id"].to_numpy()
    pairs = _assemble_pairs(pair_ids, table["role"].to_numpy(), times, stations, laterals, labels)
    unknown = sorted(set(labels) - set(pair_ids))
    if unknown:
        logger.warning("labels_without_pairs", count=len(unknown), first=unknown[0])
    dataset = _dataset(pairs, source)
    logger.info("dataset_loaded", source=source, pairs=len(dataset), samples=dataset.sample_count,
                labeled=len(dataset.labels))
    return dataset


def trajectory_table(dataset: TrajectoryDataset) -> pd.DataFrame:
    """Dataset rows in the trajectory CSV schema, floats as round-trip text"""
    rows = []
    for pair in dataset.pairs:
        for role, traj in zip(ROLES, (pair.target, pair.interacting)):
            laterals = traj.laterals if traj.laterals is not None else np.zeros(len(traj))
            for k, (station, lateral) in enumerate(zip(traj.stations, laterals)):
                rows.append((pair.pair_id, role, _format_float(k * traj.dt),
                             _format_float(station), _format_float(lateral)))
    return pd.DataFrame(rows, columns=list(TRAJECTORY_COLUMNS))


def save_dataset(dataset: TrajectoryDataset, out_dir: PathLike) -> Tuple[Path, Path]:
    """Write trajectories.csv and labels.csv into ``out_dir``"""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trajectories_path = out / TRAJECTORIES_FILE
    labels_path = out / LABELS_FILE
    trajectory_table(dataset).to_csv(trajectories_path, index=False)
    labels = pd.DataFrame(
        [(pair_id, label.value) for pair_id, label in dataset.labels.items()], columns=list(LABEL_COLUMNS)
    )
    labels.to_csv(labels_path, index=False)
    return trajectories_path, labels_path


def read_id_list(path: PathLike) -> List[str]:
    """One pair_id per line; blank lines and # comments are skipped"""
    ids = []
    for line in Path(path).read_text().splitlines():
        text = line.split("#", 1)[0].strip()
        if text:
            ids.append(text)
    return ids


def split_pairs(pair_ids: Sequence[str], test_fraction: float, seed: int) -> Tuple[List[str], List[str]]:
    """Deterministic shuffle split of pair ids; both parts keep the input order"""
    if not 0.0 <= test_fraction < 1.0:
        raise ValidationError(f"test fraction must lie in [0, 1), got {test_fraction}", field="test_fraction")
    ids = list(pair_ids)
    n_test = int(round(test_fraction * len(ids)))
    chosen = set(np.random.default_rng(seed).permutation(len(ids))[:n_test].tolist())
    train = [pair_id for i, pair_id in enumerate(ids) if i not in chosen]
    test = [pair_id for i, pair_id in enumerate(ids) if i in chosen]
    return train, test


def save_predictions(records: Sequence[PredictionRecord], path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [
        (r.pair_id, str(r.frame_index), r.model, _format_float(r.pr_pass), r.predicted.value)
        for r in records
    ]
    pd.DataFrame(rows, columns=list(PREDICTION_COLUMNS)).to_csv(out, index=False)
    return out


def load_predictions(path: PathLike, labels: Optional[Dict[str, Decision]] = None) -> List[PredictionRecord]:
    """Prediction rows, each labeled with its pair's decision when ``labels`` is given"""
    source = str(path)
    table = _read_table(path, PREDICTION_COLUMNS)
    _check_choices(table, "predicted", [d.value for d in Decision], source)
    pr_pass = _parse_floats(table, "pr_pass", source)
    frame_index = _parse_floats(table, "frame_index", source)
    labels = labels or {}
    records = []
    for i, row in enumerate(table.itertuples(index=False)):
        if not 0.0 <= pr_pass[i] <= 1.0:
            raise ParseError(source, i + 2, "pr_pass", row.pr_pass)
        if frame_index[i] < 0 or frame_index[i] != int(frame_index[i]):
            raise ParseError(source, i + 2, "frame_index", row.frame_index)
        records.append(
            PredictionRecord(
                pair_id=row.pair_id,
                frame_index=int(frame_index[i]),
                model=row.model,
                pr_pass=float(pr_pass[i]),
                predicted=Decision(row.predicted),
                label=labels.get(row.pair_id),
            )
        )
    return records


# ---------------------------------------------------------------------------
# Cartesian input
# ---------------------------------------------------------------------------

def load_paths(paths_csv: PathLike) -> Dict[str, ReferencePath]:
    """Reference polylines keyed by path_id; seq must increase within each path"""
    source = str(paths_csv)
    table = _read_table(paths_csv, PATH_COLUMNS)
    seqs = _parse_floats(table, "seq", source)
    xs = _parse_floats(table, "x_m", source)
    ys = _parse_floats(table, "y_m", source)
    path_ids = table["path_id"].to_numpy()

    last_seq: Dict[str, float] = {}
    for i, (path_id, seq) in enumerate(zip(path_ids, seqs)):
        if path_id in last_seq and seq <= last_seq[path_id]:
            raise ParseError(source, i + 2, "seq", table["seq"].iloc[i])
        last_seq[path_id] = seq

    return {
        str(path_id): ReferencePath.from_points(
            zip(xs[path_ids == path_id], ys[path_ids == path_id]), path_id=str(path_id)
        )
        for path_id in pd.unique(path_ids)
    }


def _nearest_path(paths: Dict[str, ReferencePath], points: np.ndarray) -> ReferencePath:
    def mean_distance(path: ReferencePath) -> float:
        total = 0.0
        for point in points:
            arclength, _ = project_to_path(path, point)
            foot = path.point_at(arclength)
            total += math.hypot(point[0] - foot.x, point[1] - foot.y)
        return total / len(points)

    return min(paths.values(), key=mean_distance)


@monitored("frenetize")
def frenetize(
    paths: Dict[str, ReferencePath], cartesian_csv: PathLike, labels_csv: Optional[PathLike] = None
) -> TrajectoryDataset:
    """
    Convert Cartesian trajectories to the shared Frenet frame.

    Each role follows the path named in an optional ``path_id`` column, else the path nearest
    to its samples. Station zero is the first crossing of the two paths.
    """
    source = str(cartesian_csv)
    table = _read_table(cartesian_csv, CARTESIAN_COLUMNS)
    _check_choices(table, "role", ROLES, source)
    times = _parse_floats(table, "t_s", source)
    xs = _parse_floats(table, "x_m", source)
    ys = _parse_floats(table, "y_m", source)
    has_path = "path_id" in table.columns
    if has_path:
        _check_choices(table, "path_id", list(paths), source)

    pair_ids = table["pair_id"].to_numpy()
    roles = table["role"].to_numpy()
    stations = np.zeros(len(table))
    laterals = np.zeros(len(table))
    for pair_id in pd.unique(pair_ids):
        chosen = {}
        for role in ROLES:
            mask = (pair_ids == pair_id) & (roles == role)
            if not mask.any():
                raise InconsistentPairError(pair_id, f"no {role} samples")
            if has_path:
                chosen[role] = paths[table["path_id"].to_numpy()[mask][0]]
            else:
                chosen[role] = _nearest_path(paths, np.column_stack((xs[mask], ys[mask])))
        if chosen["target"] is chosen["interacting"]:
            raise InconsistentPairError(pair_id, f"both vehicles follow path '{chosen['target'].path_id}'")

        crossing = find_crossing(chosen["target"], chosen["interacting"])
        crossings = (("target", crossing.station_on_a), ("interacting", crossing.station_on_b))
        for role, crossing_station in crossings:
            mask = (pair_ids == pair_id) & (roles == role)
            idx = np.flatnonzero(mask)
            poses = to_shared_frenet(chosen[role], crossing_station, zip(times[idx], zip(xs[idx], ys[idx])))
            stations[idx] = [pose.station for _, pose in poses]
            laterals[idx] = [pose.lateral for _, pose in poses]

    labels = load_labels(labels_csv) if labels_csv is not None else {}
    pairs = _assemble_pairs(pair_ids, roles, times, stations, laterals, labels)
    dataset = _dataset(pairs, source)
    logger.info("dataset_frenetized", source=source, pairs=len(dataset))
    return dataset


# ---------------------------------------------------------------------------
# Synthetic generator
# ---------------------------------------------------------------------------

def constant_acceleration_rollout(
    station: float, speed: float, accel: float, samples: int, dt: float
) -> np.ndarray:
    """Stations under constant acceleration, holding at rest once the speed reaches zero"""
    t = np.arange(samples) * dt
    if accel < 0 and speed > 0:
        t = np.minimum(t, -speed / accel)
    elif accel < 0:
        t = np.zeros_like(t)
    return station + speed * t + 0.5 * accel * t ** 2


def _chosen_history(
    base: np.ndarray,
    interacting: np.ndarray,
    cfg: SynthConfig,
    cfg_u: UtilityConfig,
    rng: np.random.Generator,
) -> np.ndarray:
    """Target history drawn by softmax over the rollout and smooth perturbations of it"""
    if cfg.history_candidates == 1:
        return base
    perturbations = IrlConfig(
        candidate_count=cfg.history_candidates, perturbation_scale=cfg.history_noise
    )
    demo = Demonstration(Trajectory(base, cfg.dt), Trajectory(interacting, cfg.dt))
    options = generate_candidates(demo, perturbations, rng)
    features = np.array([summed_features(option, demo.interacting, cfg_u) for option in options])
    scores = features @ np.asarray(cfg.theta)
    chosen = int(rng.choice(len(options), p=softmax(scores)))
    return options[chosen].stations


def generate_synthetic(
    cfg: SynthConfig,
    cfg_u: Optional[UtilityConfig] = None,
    limits: Optional[MotionLimits] = None,
    stop_offset: float = DEFAULT_STOP_OFFSET,
    clearance_margin: float = 0.0,
    opponent_clearance: float = 0.0,
) -> TrajectoryDataset:
    """
    Labeled pairs produced by a CPT driver with known parameters.

    Both vehicles start from constant-acceleration rollouts; the target's history is then
    drawn among smooth perturbations of its rollout by softmax over the true utility. Each
    pair is labeled from its first ``cfg.samples`` window via the full prediction pipeline,
    by argmax or by sampling the decision probabilities.

    With ``cfg.balanced`` draws are accepted only while the model's decision still has room
    in its half of the set. Selection depends on the states alone, never on the sampled
    label. When ``cfg.max_draws`` per pair run out the quotas are dropped with a warning.
    The frame outcomes behind every label are kept in ``metadata["outcomes"]``.
    """
    cfg_u = cfg_u or UtilityConfig()
    limits = limits or MotionLimits()
    rng = np.random.default_rng(cfg.rng_seed)
    params = CptParams.driving(cfg.alpha, cfg.gamma)
    accel_low = max(cfg.accel_range[0], limits.a_min)
    accel_high = min(cfg.accel_range[1], limits.a_max)
    quotas: Optional[Dict[Decision, int]] = None
    if cfg.balanced:
        quotas = {Decision.PASS: (cfg.n_pairs + 1) // 2, Decision.YIELD: cfg.n_pairs // 2}
    draw_limit = cfg.max_draws * cfg.n_pairs

    pairs: List[InteractionPair] = []
    probabilities: Dict[str, float] = {}
    outcomes_by_pair: Dict[str, FrameOutcomes] = {}
    draws = 0
    with get_metrics().measure("generate_synthetic"):
        while len(pairs) < cfg.n_pairs:
            draws += 1
            pair_id = f"pair_{len(pairs):04d}"
            base = constant_acceleration_rollout(
                rng.uniform(*cfg.target_station_range),
                rng.uniform(*cfg.target_speed_range),
                rng.uniform(accel_low, accel_high),
                cfg.samples,
                cfg.dt,
            )
            interacting = constant_acceleration_rollout(
                rng.uniform(*cfg.interacting_station_range),
                rng.uniform(*cfg.interacting_speed_range),
                rng.uniform(accel_low, accel_high),
                cfg.samples,
                cfg.dt,
            )
            target = _chosen_history(base, interacting, cfg, cfg_u, rng)
            draw = rng.random()
            frame = Frame(pair_id, 0, Trajectory(target, cfg.dt), Trajectory(interacting, cfg.dt))
            outcomes = frame_outcomes(
                frame, cfg.theta, cfg_u, limits, cfg.horizon, cfg.dt, stop_offset, clearance_margin,
                opponent_clearance,
            )
            prediction = prediction_from_outcomes(outcomes, params, cfg.mode)

            if quotas is not None:
                if quotas[prediction.decision] == 0:
                    if draws < draw_limit:
                        continue
                    logger.warning("synthetic_quota_unmet", draws=draws, pairs=len(pairs),
                                   remaining={d.value: q for d, q in quotas.items()})
                    quotas = None
                else:
                    quotas[prediction.decision] -= 1

            if cfg.label_noise is LabelNoise.ARGMAX:
                label = prediction.decision
            else:
                label = Decision.PASS if draw < prediction.pr_pass else Decision.YIELD
            probabilities[pair_id] = prediction.pr_pass
            outcomes_by_pair[pair_id] = outcomes
            pairs.append(InteractionPair(pair_id, frame.target, frame.interacting, label))

    dataset = TrajectoryDataset(
        pairs=pairs,
        dt=cfg.dt,
        source="synthetic",
        metadata={
            "rng_seed": cfg.rng_seed,
            "draws": draws,
            "pr_pass": probabilities,
            "outcomes": outcomes_by_pair,
        },
    )
    passes = sum(1 for pair in pairs if pair.label is Decision.PASS)
    logger.info("synthetic_generated", pairs=len(pairs), passes=passes, draws=draws, seed=cfg.rng_seed,
                label_noise=cfg.label_noise.value)
    return dataset


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------

def export_curves(params: CptParams, samples: int = 101, utility_range: float = 10.0) -> pd.DataFrame:
    """Weighting curves on [0, 1] and the value curve on [-utility_range, utility_range]"""
    if samples < 2:
        raise ValidationError(f"samples must be at least 2, got {samples}", field="samples")
    p = np.linspace(0.0, 1.0, samples)
    u = np.linspace(-utility_range, utility_range, samples)
    return pd.DataFrame(
        {
            "p": p,
            "w_plus": weighting_fn(p, params.gamma),
            "w_minus": weighting_fn(p, params.delta),
            "u": u,
            "v": value_fn(u, params),
        },
        columns=list(CURVE_COLUMNS),
    )


def write_curves(curves: pd.DataFrame, path: PathLike) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    curves.apply(lambda column: column.map(_format_float)).to_csv(out, index=False)
    return out
