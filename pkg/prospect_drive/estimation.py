"""
Prospect Drive - Estimation
Two-stage learning: maximum-entropy IRL over candidate sets for the utility weights, then a
nonlinear logistic regression for the CPT curvature and weighting exponents.
"""

import math
import warnings
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.ndimage import uniform_filter1d
from scipy.optimize import minimize
from scipy.special import expit, logsumexp, softmax

from .cpt import DrivingUtilities, driving_value_arrays
from .exceptions import (
    DegenerateLabelsWarning,
    EmptyCandidatesError,
    EmptyDatasetError,
    LengthMismatchError,
    NegativeUtilityError,
    ValidationError,
)
from .features import FEATURE_COUNT, as_theta, summed_features
from .kinematics import InteractionPair, Trajectory
from .models import Decision, FitResult, IrlConfig, UtilityConfig, WeightingMode
from .observability import get_metrics

logger = structlog.get_logger(__name__)

PROBABILITY_CLAMP = 1e-12
DEFAULT_GRID_RESOLUTION = 20
# Lower edge of the (0, 1] box during local refinement
PARAMETER_FLOOR = 1e-3
MAX_LINE_SEARCH_HALVINGS = 50


@dataclass(frozen=True, eq=False)
class Demonstration:
    """Decision-free trajectory pair; the target is treated as a utility maximizer"""
    target: Trajectory
    interacting: Trajectory

    def __post_init__(self):
        if len(self.target) != len(self.interacting):
            raise LengthMismatchError(len(self.target), len(self.interacting))

    @classmethod
    def from_pair(cls, pair: InteractionPair) -> "Demonstration":
        return cls(pair.target, pair.interacting)


@dataclass(frozen=True)
class CptObservation:
    """Frame-level inputs of the CPT fit"""
    utilities: DrivingUtilities
    p_yield: float
    label: Decision


# ---------------------------------------------------------------------------
# Stage 1: utility weights
# ---------------------------------------------------------------------------

def smooth_offsets(
    samples: int, dt: float, scale: float, window: int, rng: np.random.Generator
) -> np.ndarray:
    """
    Station offsets from smoothed Gaussian acceleration noise, integrated twice.

    The first offset and its speed are zero, so a perturbed trajectory keeps the
    initial state it was drawn around.
    """
    accel = uniform_filter1d(rng.normal(0.0, scale, size=samples), size=window, mode="nearest")
    accel[0] = 0.0
    return np.cumsum(np.cumsum(accel) * dt) * dt


def generate_candidates(
    demo: Demonstration, cfg: IrlConfig, rng: np.random.Generator
) -> List[Trajectory]:
    """
    The demonstration followed by smooth perturbations of it.

    Offsets come from :func:`smooth_offsets`, so candidates differ from the demonstration
    in speed, acceleration, jerk and gap. Stations are made monotone by a running maximum.
    """
    target = demo.target
    candidates = [target]
    for _ in range(cfg.candidate_count - 1):
        offsets = smooth_offsets(len(target), target.dt, cfg.perturbation_scale, cfg.smoothing_window, rng)
        candidates.append(target.with_stations(np.maximum.accumulate(target.stations + offsets)))
    return candidates


@dataclass(frozen=True, eq=False)
class _FeatureBank:
    demo_features: np.ndarray                 # (D, 4)
    candidate_features: Tuple[np.ndarray, ...]  # D arrays of shape (C_i, 4)

    @classmethod
    def build(
        cls,
        demos: Sequence[Demonstration],
        candidates_per_demo: Sequence[Sequence[Trajectory]],
        cfg_u: UtilityConfig,
    ) -> "_FeatureBank":
        if len(candidates_per_demo) != len(demos):
            raise ValidationError(
                "one candidate set is needed per demonstration", field="candidates_per_demo"
            )
        demo_rows = []
        sets = []
        for i, (demo, candidates) in enumerate(zip(demos, candidates_per_demo)):
            if len(candidates) == 0:
                raise EmptyCandidatesError(i)
            demo_rows.append(summed_features(demo.target, demo.interacting, cfg_u))
            sets.append(np.array([summed_features(c, demo.interacting, cfg_u) for c in candidates]))
        return cls(np.array(demo_rows).reshape(-1, FEATURE_COUNT), tuple(sets))

    def loglik_and_grad(self, theta: np.ndarray) -> Tuple[float, np.ndarray]:
        loglik = float(self.demo_features.sum(axis=0) @ theta)
        grad = self.demo_features.sum(axis=0).copy()
        for features in self.candidate_features:
            scores = features @ theta
            loglik -= float(logsumexp(scores))
            grad -= softmax(scores) @ features
        return loglik, grad

    def fisher(self, theta: np.ndarray) -> np.ndarray:
        """Negative Hessian of the log-likelihood: summed softmax feature covariances"""
        info = np.zeros((FEATURE_COUNT, FEATURE_COUNT))
        for features in self.candidate_features:
            weights = softmax(features @ theta)
            centered = features - weights @ features
            info += (centered * weights[:, None]).T @ centered
        return info

    def top_ranked(self, theta: np.ndarray) -> np.ndarray:
        """Whether each demonstration scores at least as high as all its candidates"""
        demo_scores = self.demo_features @ theta
        best = np.array([np.max(features @ theta) for features in self.candidate_features])
        return demo_scores >= best - 1e-12 * np.maximum(1.0, np.abs(best))


def irl_loglik_and_grad(
    theta: Sequence[float],
    demos: Sequence[Demonstration],
    candidates_per_demo: Sequence[Sequence[Trajectory]],
    cfg_u: Optional[UtilityConfig] = None,
) -> Tuple[float, np.ndarray]:
    """Candidate-set log-likelihood of the demonstrations and its gradient in theta"""
    bank = _FeatureBank.build(demos, candidates_per_demo, cfg_u or UtilityConfig())
    return bank.loglik_and_grad(as_theta(theta))


def irl_fit(
    demos: Sequence[Demonstration],
    cfg: Optional[IrlConfig] = None,
    cfg_u: Optional[UtilityConfig] = None,
    candidates_per_demo: Optional[Sequence[Sequence[Trajectory]]] = None,
) -> FitResult:
    """
    Maximum-likelihood utility weights, ascending from theta = 0.

    Steps follow the gradient preconditioned by the summed feature covariance and are
    halved until the log-likelihood does not drop. Candidate sets are generated from the
    demonstrations unless supplied.
    """
    cfg = cfg or IrlConfig()
    cfg_u = cfg_u or UtilityConfig()
    if not demos:
        raise EmptyDatasetError("demonstration set")

    if candidates_per_demo is None:
        rng = np.random.default_rng(cfg.rng_seed)
        candidates_per_demo = [generate_candidates(demo, cfg, rng) for demo in demos]
    bank = _FeatureBank.build(demos, candidates_per_demo, cfg_u)

    theta = np.zeros(FEATURE_COUNT)
    loglik, grad = bank.loglik_and_grad(theta)
    trace = [-loglik]
    converged = False
    iterations = 0

    with get_metrics().measure("irl_fit"):
        for iterations in range(1, cfg.max_iterations + 1):
            if np.max(np.abs(grad)) < cfg.gradient_tolerance:
                converged = True
                break
            info = bank.fisher(theta)
            ridge = 1e-8 * max(float(np.trace(info)) / FEATURE_COUNT, 1e-4)
            direction = np.linalg.solve(info + ridge * np.eye(FEATURE_COUNT), grad)

            step = cfg.learning_rate
            accepted = False
            for _ in range(MAX_LINE_SEARCH_HALVINGS):
                candidate = theta + step * direction
                cand_loglik, cand_grad = bank.loglik_and_grad(candidate)
                if math.isfinite(cand_loglik) and cand_loglik >= loglik:
                    accepted = True
                    break
                step *= 0.5
            if not accepted:
                break
            theta, loglik, grad = candidate, cand_loglik, cand_grad
            trace.append(-loglik)
        else:
            converged = bool(np.max(np.abs(grad)) < cfg.gradient_tolerance)

    get_metrics().record_optimizer("irl_fit", iterations, converged)
    ranked_first = float(np.mean(bank.top_ranked(theta)))
    log = logger.info if converged else logger.warning
    log(
        "irl_fit_complete",
        converged=converged,
        iterations=iterations,
        loglik=loglik,
        gradient_norm=float(np.max(np.abs(grad))),
        demos_ranked_first=ranked_first,
        theta=theta.tolist(),
    )
    return FitResult(
        theta=theta.tolist(),
        loss=-loglik,
        converged=converged,
        trace=trace,
        iterations=iterations,
    )


# ---------------------------------------------------------------------------
# Stage 2: CPT parameters
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class _ObservationArrays:
    u_pass_yield: np.ndarray
    u_pass_nonyield: np.ndarray
    u_yield: np.ndarray
    p_yield: np.ndarray
    is_pass: np.ndarray

    @classmethod
    def build(cls, observations: Sequence[CptObservation]) -> "_ObservationArrays":
        utilities = np.array([o.utilities.as_tuple() for o in observations], dtype=float).reshape(-1, 3)
        if np.any(utilities < 0):
            row, col = map(int, np.argwhere(utilities < 0)[0])
            names = ("u_pass_yield", "u_pass_nonyield", "u_yield")
            raise NegativeUtilityError(names[col], float(utilities[row, col]))
        p_yield = np.array([o.p_yield for o in observations], dtype=float)
        if np.any((p_yield < 0) | (p_yield > 1)):
            raise ValidationError("p_yield must lie in [0, 1]", field="p_yield")
        is_pass = np.array([Decision(o.label) is Decision.PASS for o in observations], dtype=bool)
        return cls(utilities[:, 0], utilities[:, 1], utilities[:, 2], p_yield, is_pass)

    def __len__(self) -> int:
        return len(self.p_yield)

    def loss(self, alpha: float, gamma: float, mode: WeightingMode) -> float:
        if len(self) == 0:
            return 0.0
        v_pass, v_yield = driving_value_arrays(
            self.u_pass_yield, self.u_pass_nonyield, self.u_yield, self.p_yield, alpha, gamma, mode
        )
        pr_pass = expit(v_pass - v_yield)
        chosen = np.where(self.is_pass, pr_pass, 1.0 - pr_pass)
        clamped = np.clip(chosen, PROBABILITY_CLAMP, 1.0 - PROBABILITY_CLAMP)
        clamps = int(np.count_nonzero(clamped != chosen))
        if clamps:
            get_metrics().probability_clamps.inc(clamps)
        return float(-np.sum(np.log(clamped)))


def _check_unit_interval(alpha: float, gamma: float) -> None:
    for name, value in (("alpha", alpha), ("gamma", gamma)):
        if not 0.0 < value <= 1.0:
            raise ValidationError(f"{name} must lie in (0, 1], got {value}", field=name)


def cpt_loss(
    params: Tuple[float, float],
    observations: Sequence[CptObservation],
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
) -> float:
    """Cross-entropy of the labels under the CPT softmax decision model"""
    alpha, gamma = params
    _check_unit_interval(alpha, gamma)
    return _ObservationArrays.build(observations).loss(alpha, gamma, mode)


def grid_points(resolution: int) -> np.ndarray:
    """Evenly spaced points of (0, 1], ending at 1"""
    return np.arange(1, resolution + 1) / resolution


def cpt_fit(
    observations: Sequence[CptObservation],
    mode: WeightingMode = WeightingMode.PAPER_EXACT,
    grid_resolution: int = DEFAULT_GRID_RESOLUTION,
) -> FitResult:
    """
    Fit (alpha, gamma) by grid search over (0, 1]^2 followed by Nelder-Mead refinement.

    A flat loss surface returns (1, 1) flagged as not converged.
    """
    if not observations:
        raise EmptyDatasetError("observation set")
    if grid_resolution < 2:
        raise ValidationError("grid resolution must be at least 2", field="grid_resolution")
    data = _ObservationArrays.build(observations)
    passes = int(data.is_pass.sum())
    if passes in (0, len(data)):
        logger.warning("degenerate_labels", passes=passes, total=len(data))
        warnings.warn(
            f"only one decision class among {len(data)} observations", DegenerateLabelsWarning, stacklevel=2
        )

    axis = grid_points(grid_resolution)
    with get_metrics().measure("cpt_grid"):
        losses = np.array([[data.loss(a, g, mode) for g in axis] for a in axis])

    lowest, highest = float(losses.min()), float(losses.max())
    if highest - lowest <= 1e-12 * max(1.0, abs(lowest)):
        logger.warning("cpt_loss_flat", loss=lowest)
        get_metrics().record_optimizer("cpt_fit", 0, False)
        return FitResult(alpha=1.0, gamma=1.0, loss=data.loss(1.0, 1.0, mode), converged=False,
                         trace=[lowest], iterations=0, mode=mode)

    i, j = np.unravel_index(int(np.argmin(losses)), losses.shape)
    start = np.array([axis[i], axis[j]])
    trace = [lowest]

    def objective(x: np.ndarray) -> float:
        a, g = np.clip(x, PARAMETER_FLOOR, 1.0)
        return data.loss(float(a), float(g), mode)

    half = 0.5 / grid_resolution
    simplex = [start.copy()]
    for axis_index in range(2):
        vertex = start.copy()
        vertex[axis_index] += -half if vertex[axis_index] + half > 1.0 else half
        simplex.append(np.clip(vertex, PARAMETER_FLOOR, 1.0))

    with get_metrics().measure("cpt_refine"):
        result = minimize(
            objective,
            start,
            method="Nelder-Mead",
            bounds=[(PARAMETER_FLOOR, 1.0), (PARAMETER_FLOOR, 1.0)],
            callback=lambda xk: trace.append(objective(xk)),
            options={"initial_simplex": np.array(simplex), "xatol": 1e-7, "fatol": 1e-10, "maxiter": 800},
        )

    refined = np.clip(result.x, PARAMETER_FLOOR, 1.0)
    refined_loss = objective(refined)
    if refined_loss <= lowest:
        alpha, gamma, loss = float(refined[0]), float(refined[1]), refined_loss
    else:
        alpha, gamma, loss = float(start[0]), float(start[1]), lowest
    trace = [float(t) for t in np.minimum.accumulate(trace)]
    if loss < trace[-1]:
        trace.append(loss)

    converged = bool(result.success)
    get_metrics().record_optimizer("cpt_fit", int(result.nit), converged)
    logger.info("cpt_fit_complete", alpha=alpha, gamma=gamma, loss=loss, converged=converged,
                iterations=int(result.nit), mode=WeightingMode(mode).value)
    return FitResult(alpha=alpha, gamma=gamma, loss=loss, converged=converged,
                     trace=trace, iterations=int(result.nit), mode=mode)
