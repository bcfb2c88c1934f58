"""
Prospect Drive - Utility features
Four exponential-quadratic trajectory features, the linear utility over their sums, and its
analytic gradient with respect to the target stations.
"""

from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .exceptions import LengthMismatchError, ValidationError
from .kinematics import Trajectory, difference_operators
from .models import UtilityConfig

FEATURE_COUNT = 4


class FeatureVector(NamedTuple):
    phi1_speed: float
    phi2_accel: float
    phi3_jerk: float
    phi4_safety: float


def as_theta(theta: Sequence[float]) -> np.ndarray:
    """Validate a weight vector and return it as a float array"""
    array = np.asarray(theta, dtype=float)
    if array.shape != (FEATURE_COUNT,):
        raise ValidationError(f"theta must have {FEATURE_COUNT} weights, got shape {array.shape}", field="theta")
    if not np.all(np.isfinite(array)):
        raise ValidationError("theta must be finite", field="theta")
    return array


def features_at(
    station: float,
    speed: float,
    acceleration: float,
    jerk: float,
    interacting_station: float,
    cfg: UtilityConfig,
) -> FeatureVector:
    """Feature values of a single target state"""
    return FeatureVector(
        float(np.exp(-(((speed - cfg.v_traffic) / cfg.speed_scale) ** 2))),
        float(np.exp(-((acceleration / cfg.accel_scale) ** 2))),
        float(np.exp(-((jerk / cfg.jerk_scale) ** 2))),
        float(np.exp(-(((interacting_station - station) / cfg.gap_scale) ** 2))),
    )


def _check_lengths(target: Trajectory, interacting: Optional[Trajectory]) -> None:
    if interacting is not None and len(interacting) != len(target):
        raise LengthMismatchError(len(target), len(interacting))


def _normalized_terms(
    stations: np.ndarray,
    dt: float,
    interacting: Optional[Trajectory],
    cfg: UtilityConfig,
):
    speed_op, accel_op, jerk_op = difference_operators(len(stations), dt)
    z_speed = (speed_op @ stations - cfg.v_traffic) / cfg.speed_scale
    z_accel = (accel_op @ stations) / cfg.accel_scale
    z_jerk = (jerk_op @ stations) / cfg.jerk_scale
    if interacting is None:
        z_gap = None
    else:
        z_gap = (interacting.stations - stations) / cfg.gap_scale
    return (speed_op, accel_op, jerk_op), (z_speed, z_accel, z_jerk, z_gap)


def feature_matrix(
    target: Trajectory, interacting: Optional[Trajectory], cfg: UtilityConfig
) -> np.ndarray:
    """
    Per-step features, shape (N, 4).

    Without an interacting trajectory the safety column is its far-separation limit, 0.
    """
    _check_lengths(target, interacting)
    _, (z_speed, z_accel, z_jerk, z_gap) = _normalized_terms(target.stations, target.dt, interacting, cfg)
    phi = np.zeros((len(target), FEATURE_COUNT))
    phi[:, 0] = np.exp(-z_speed ** 2)
    phi[:, 1] = np.exp(-z_accel ** 2)
    phi[:, 2] = np.exp(-z_jerk ** 2)
    if z_gap is not None:
        phi[:, 3] = np.exp(-z_gap ** 2)
    return phi


def summed_features(
    target: Trajectory, interacting: Optional[Trajectory], cfg: UtilityConfig
) -> np.ndarray:
    """Feature sums over the horizon, the vector the utility is linear in"""
    return feature_matrix(target, interacting, cfg).sum(axis=0)


def utility(
    target: Trajectory,
    interacting: Optional[Trajectory],
    theta: Sequence[float],
    cfg: UtilityConfig,
) -> float:
    """Linear utility theta . sum_k phi_k"""
    return float(as_theta(theta) @ summed_features(target, interacting, cfg))


def utility_gradient(
    target: Trajectory,
    interacting: Optional[Trajectory],
    theta: Sequence[float],
    cfg: UtilityConfig,
) -> np.ndarray:
    """
    Gradient of ``utility`` with respect to each target station.

    The kinematics are linear in the stations, so the chain rule reduces to the transposed
    difference operators applied to per-step feature slopes.
    """
    _check_lengths(target, interacting)
    other = None if interacting is None else interacting.stations
    _, gradient = station_utility(target.stations, target.dt, other, as_theta(theta), cfg)
    return gradient


def station_utility(
    stations: np.ndarray,
    dt: float,
    interacting: Optional[np.ndarray],
    weights: np.ndarray,
    cfg: UtilityConfig,
) -> Tuple[float, np.ndarray]:
    """Utility and its station gradient on raw arrays; inputs are trusted"""
    speed_op, accel_op, jerk_op = difference_operators(len(stations), dt)
    z_speed = (speed_op @ stations - cfg.v_traffic) / cfg.speed_scale
    z_accel = (accel_op @ stations) / cfg.accel_scale
    z_jerk = (jerk_op @ stations) / cfg.jerk_scale
    phi_speed, phi_accel, phi_jerk = np.exp(-z_speed ** 2), np.exp(-z_accel ** 2), np.exp(-z_jerk ** 2)
    value = weights[0] * phi_speed.sum() + weights[1] * phi_accel.sum() + weights[2] * phi_jerk.sum()

    # d/dx exp(-(x/l)^2) = -2 (x/l) exp(-(x/l)^2) / l
    slope_speed = -2.0 * z_speed * phi_speed / cfg.speed_scale
    slope_accel = -2.0 * z_accel * phi_accel / cfg.accel_scale
    slope_jerk = -2.0 * z_jerk * phi_jerk / cfg.jerk_scale

    gradient = (
        weights[0] * (speed_op.T @ slope_speed)
        + weights[1] * (accel_op.T @ slope_accel)
        + weights[2] * (jerk_op.T @ slope_jerk)
    )
    if interacting is not None:
        z_gap = (interacting - stations) / cfg.gap_scale
        phi_gap = np.exp(-z_gap ** 2)
        value += weights[3] * phi_gap.sum()
        # the gap is s_I - s_T, hence the sign
        gradient = gradient + weights[3] * 2.0 * z_gap * phi_gap / cfg.gap_scale
    return float(value), gradient
