"""
Prospect Drive - Trajectory synthesis
Counterfactual target trajectories: the optimal pass when the opponent yields, the pass cut
short by maximal braking when it does not, and the yield bounded by a stop station. The
opponent itself is rolled out at constant speed.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .exceptions import InfeasibleStartError, NonConvergenceError, ValidationError
from .features import as_theta, station_utility
from .kinematics import Trajectory, difference_operators, kinematics
from .models import MotionLimits, UtilityConfig
from .observability import get_metrics

logger = structlog.get_logger(__name__)

SOLVER_MAX_ITERATIONS = 200
SOLVER_TOLERANCE = 1e-10
MAX_ITERATIONS = 500
IMPROVEMENT_TOLERANCE = 1e-8
INITIAL_STEP = 1.0
MAX_HALVINGS = 40
MAX_RESTARTS = 5
DEFAULT_STOP_OFFSET = 3.0


@dataclass(frozen=True)
class InitialState:
    """Current longitudinal state of a vehicle"""
    station: float
    speed: float
    acceleration: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in (self.station, self.speed, self.acceleration)):
            raise ValidationError("initial state must be finite", field="init")
        if self.speed < 0:
            raise ValidationError(f"initial speed must be non-negative, got {self.speed}", field="speed")


@dataclass(frozen=True)
class YieldConstraint:
    """
    Upper bound on the target station while it waits for the opponent.

    An infinite ``stop_station`` means the bound is inactive.
    """
    stop_station: float
    clearance_margin: float = 0.0

    def __post_init__(self):
        if math.isnan(self.stop_station) or (math.isfinite(self.stop_station) and self.stop_station >= 0):
            raise ValidationError(
                f"stop station must be before the crossing, got {self.stop_station}", field="stop_station"
            )
        if self.clearance_margin < 0:
            raise ValidationError("clearance margin must be non-negative", field="clearance_margin")

    @classmethod
    def before_crossing(cls, offset: float = DEFAULT_STOP_OFFSET, clearance_margin: float = 0.0) -> "YieldConstraint":
        return cls(stop_station=-offset, clearance_margin=clearance_margin)

    @classmethod
    def unbounded(cls) -> "YieldConstraint":
        return cls(stop_station=math.inf)

    @property
    def is_active(self) -> bool:
        return math.isfinite(self.stop_station)


def initial_state(traj: Trajectory) -> InitialState:
    """State at the last sample of a history window"""
    profile = kinematics(traj)
    return InitialState(
        station=float(traj.stations[-1]),
        speed=max(float(profile.speeds[-1]), 0.0),
        acceleration=float(profile.accelerations[-1]),
    )


def constant_speed_trajectory(init: InitialState, horizon: int, dt: float) -> Trajectory:
    if horizon < 2:
        raise ValidationError(f"horizon must be at least 2 samples, got {horizon}", field="horizon")
    return Trajectory(init.station + np.arange(horizon) * dt * init.speed, dt)


def braking_reach(speed: float, speed_drop: float, dt: float) -> float:
    """Distance covered after the current sample while braking by ``speed_drop`` per step"""
    if speed <= 0.0:
        return 0.0
    steps = int(math.ceil(speed / speed_drop)) - 1
    # sum_{i=1..steps} (speed - i * drop), all terms positive
    return dt * (steps * speed - speed_drop * steps * (steps + 1) / 2.0)


def braking_tail(station: float, speed: float, limits: MotionLimits, dt: float, steps: int) -> np.ndarray:
    """Stations of ``steps`` samples braking at a_min from (station, speed), clipped at rest"""
    drop = -limits.a_min * dt
    speeds = np.maximum(speed - drop * np.arange(1, steps + 1), 0.0)
    return station + np.cumsum(speeds * dt)


def _max_stoppable_speed(gap: float, speed_drop: float, dt: float) -> float:
    """
    Largest speed for the next step from which braking still ends within ``gap``.

    Covered distance is dt * (v + sum_i max(0, v - i * drop)), piecewise linear in v.
    """
    if gap <= 0.0:
        return 0.0
    c = 2.0 * gap / (dt * speed_drop)
    # (m + 1)(m + 2) >= c picks the linear piece; the loop only absorbs rounding
    m = max(int(math.ceil(math.sqrt(c + 0.25) - 1.5)), 0)
    v = 0.0
    for _ in range(8):
        v = (gap / dt + speed_drop * m * (m + 1) / 2.0) / (m + 1)
        if v > (m + 1) * speed_drop:
            m += 1
        elif v < m * speed_drop and m > 0:
            m -= 1
        else:
            break
    return v


def project_feasible(
    stations: Sequence[float],
    init: InitialState,
    limits: MotionLimits,
    dt: float,
    stop_station: Optional[float] = None,
) -> np.ndarray:
    """
    Map a station sequence onto the feasible set.

    The first sample is pinned to the initial station; every following step speed is clamped
    into the band reachable from the previous step (starting from the initial speed), capped
    at v_max, kept non-negative, and, under a stop bound, low enough that braking at a_min can
    still halt before it. Feasible input comes back unchanged up to rounding.
    """
    y = np.asarray(stations, dtype=float)
    drop = -limits.a_min * dt
    rise = limits.a_max * dt
    bounded = stop_station is not None and math.isfinite(stop_station)

    out = np.empty(len(y))
    out[0] = prev_s = init.station
    prev_v = min(init.speed, limits.v_max)
    for k in range(1, len(y)):
        v = (y[k] - prev_s) / dt
        low = max(0.0, prev_v - drop)
        high = min(limits.v_max, prev_v + rise)
        if bounded:
            high = min(high, _max_stoppable_speed(stop_station - prev_s, drop, dt))
        v = max(low, min(high, v))
        prev_s = prev_s + v * dt
        out[k] = prev_s
        prev_v = v
    if bounded:
        np.minimum(out, stop_station, out=out)
    return out


def _linear_limits(init: InitialState, limits: MotionLimits, horizon: int, dt: float):
    """
    Rows ``G`` and offsets ``h`` with ``G @ z + h >= 0`` over the free stations ``z = s[1:]``.

    Step speeds stay in [0, v_max]; each change of step speed stays in [a_min dt, a_max dt],
    the first one measured from the initial speed.
    """
    m = horizon - 1
    difference = np.eye(m) - np.eye(m, k=-1)
    speed = difference / dt
    speed_offset = np.zeros(m)
    speed_offset[0] = -init.station / dt
    change = difference @ speed
    change_offset = difference @ speed_offset
    change_offset[0] -= min(init.speed, limits.v_max)
    rows = np.vstack((speed, -speed, change, -change))
    offsets = np.concatenate((
        speed_offset,
        limits.v_max - speed_offset,
        change_offset - limits.a_min * dt,
        limits.a_max * dt - change_offset,
    ))
    return rows, offsets


def _stop_margin(init: InitialState, limits: MotionLimits, dt: float, stop_station: float):
    """Room left before the stop after braking at a_min from the last sample, and its gradient"""
    drop = -limits.a_min * dt

    def margin(free: np.ndarray) -> float:
        before = free[-2] if len(free) > 1 else init.station
        speed = (free[-1] - before) / dt
        return stop_station - free[-1] - braking_reach(speed, drop, dt)

    def gradient(free: np.ndarray) -> np.ndarray:
        before = free[-2] if len(free) > 1 else init.station
        speed = (free[-1] - before) / dt
        # braking_reach is piecewise linear in speed with slope dt per still-moving step
        moving = max(int(math.ceil(speed / drop)) - 1, 0) if speed > 0.0 else 0
        out = np.zeros(len(free))
        out[-1] = -1.0 - moving
        if len(free) > 1:
            out[-2] = float(moving)
        return out

    return margin, gradient


def _preconditioner(n: int, dt: float, theta: np.ndarray, cfg: UtilityConfig, with_gap: bool):
    """Cholesky factor of the feature curvature at the nominal point, free stations only"""
    speed_op, accel_op, jerk_op = difference_operators(n, dt)
    metric = np.zeros((n, n))
    for weight, op, scale in (
        (theta[0], speed_op, cfg.speed_scale),
        (theta[1], accel_op, cfg.accel_scale),
        (theta[2], jerk_op, cfg.jerk_scale),
    ):
        metric += abs(weight) * 2.0 / scale ** 2 * (op.T @ op)
    if with_gap:
        metric += abs(theta[3]) * 2.0 / cfg.gap_scale ** 2 * np.eye(n)
    free = metric[1:, 1:]
    ridge = 1e-8 * max(float(np.trace(free)) / max(n - 1, 1), 1.0)
    return cho_factor(free + ridge * np.eye(n - 1))


def _projected_ascent(
    name: str,
    x: np.ndarray,
    project: Callable[[np.ndarray], np.ndarray],
    evaluate: Callable[[np.ndarray], Tuple[float, np.ndarray]],
    factor,
) -> Tuple[np.ndarray, bool]:
    """Preconditioned projected gradient ascent with a halving line search"""
    u, _ = evaluate(x)
    base_step = INITIAL_STEP
    restarts = 0
    converged = False
    iterations = 0

    for iterations in range(1, MAX_ITERATIONS + 1):
        _, gradient = evaluate(x)
        gradient[0] = 0.0
        scaled = np.zeros_like(gradient)
        scaled[1:] = cho_solve(factor, gradient[1:])

        accepted = None
        saw_finite = False
        for direction in (scaled, gradient):
            step = base_step
            for _ in range(MAX_HALVINGS):
                candidate = project(x + step * direction)
                value, _ = evaluate(candidate)
                if math.isfinite(value):
                    saw_finite = True
                    if value > u:
                        accepted = (candidate, value)
                        break
                step *= 0.5
            if accepted is not None:
                break

        if accepted is None:
            if saw_finite:
                converged = True
                break
            restarts += 1
            if restarts >= MAX_RESTARTS:
                get_metrics().record_optimizer(name, iterations, False)
                raise NonConvergenceError(name, iterations, "line search produced no finite step")
            base_step *= 0.1
            continue

        restarts = 0
        improvement = accepted[1] - u
        x, u = accepted
        if improvement < IMPROVEMENT_TOLERANCE:
            converged = True
            break

    get_metrics().record_optimizer(name, iterations, converged)
    if not converged:
        logger.warning("trajectory_optimizer_iteration_cap", optimizer=name, iterations=iterations, utility=u)
    return x, converged


def _maximize(
    name: str,
    init: InitialState,
    theta: Sequence[float],
    cfg: UtilityConfig,
    limits: MotionLimits,
    horizon: int,
    dt: float,
    stop_station: Optional[float],
    interacting: Optional[Trajectory],
) -> Trajectory:
    """
    Feasible local maximizer of the utility, started from the projected constant-speed rollout.

    SLSQP solves over the free stations with the motion limits as linear constraints and the
    stop bound as a braking-distance constraint. When it reports failure, projected gradient
    ascent continues from the better of its result and the start.
    """
    weights = as_theta(theta)
    if interacting is not None and len(interacting) != horizon:
        raise ValidationError("interacting trajectory must span the horizon", field="interacting")
    other = None if interacting is None else interacting.stations

    def project(stations: np.ndarray) -> np.ndarray:
        return project_feasible(stations, init, limits, dt, stop_station)

    def evaluate(stations: np.ndarray) -> Tuple[float, np.ndarray]:
        return station_utility(stations, dt, other, weights, cfg)

    start = project(constant_speed_trajectory(init, horizon, dt).stations)
    if not np.any(weights):
        # flat objective: every feasible trajectory is optimal
        get_metrics().record_optimizer(name, 0, True)
        return Trajectory(start, dt)

    def negative(free: np.ndarray) -> Tuple[float, np.ndarray]:
        value, gradient = evaluate(np.concatenate(([init.station], free)))
        return -value, -gradient[1:]

    rows, offsets = _linear_limits(init, limits, horizon, dt)
    constraints = [{"type": "ineq", "fun": lambda z: rows @ z + offsets, "jac": lambda z: rows}]
    if stop_station is not None and math.isfinite(stop_station):
        margin, margin_gradient = _stop_margin(init, limits, dt, stop_station)
        constraints.append({"type": "ineq", "fun": margin, "jac": margin_gradient})

    result = minimize(
        negative,
        start[1:],
        jac=True,
        method="SLSQP",
        constraints=constraints,
        options={"maxiter": SOLVER_MAX_ITERATIONS, "ftol": SOLVER_TOLERANCE},
    )

    x, u = start, evaluate(start)[0]
    if np.all(np.isfinite(result.x)):
        solved = project(np.concatenate(([init.station], result.x)))
        value, _ = evaluate(solved)
        if value >= u:
            x, u = solved, value
    if result.success:
        get_metrics().record_optimizer(name, int(result.nit), True)
        return Trajectory(x, dt)

    logger.info("trajectory_solver_fallback", optimizer=name, status=int(result.status), reason=str(result.message))
    factor = _preconditioner(horizon, dt, weights, cfg, interacting is not None)
    x, _ = _projected_ascent(name, x, project, evaluate, factor)
    return Trajectory(x, dt)


def optimal_pass_trajectory(
    init: InitialState,
    theta: Sequence[float],
    cfg: UtilityConfig,
    limits: MotionLimits,
    horizon: int,
    dt: float,
    interacting: Optional[Trajectory] = None,
) -> Trajectory:
    """
    Utility-maximizing trajectory with no stop bound.

    Without ``interacting`` the proximity feature sits at its far-separation limit.
    """
    return _maximize("optimal_pass", init, theta, cfg, limits, horizon, dt, None, interacting)


def optimal_yield_trajectory(
    init: InitialState,
    constraint: YieldConstraint,
    theta: Sequence[float],
    cfg: UtilityConfig,
    limits: MotionLimits,
    horizon: int,
    dt: float,
    interacting: Optional[Trajectory] = None,
) -> Trajectory:
    """
    Utility-maximizing trajectory that never passes ``constraint.stop_station``.

    When braking at a_min from the initial state cannot halt before the bound, the bound is
    moved to the nearest reachable stop and a warning is logged.
    """
    if not constraint.is_active:
        return _maximize("optimal_yield", init, theta, cfg, limits, horizon, dt, None, interacting)
    if init.station > constraint.stop_station:
        raise InfeasibleStartError(init.station, constraint.stop_station)

    stop = constraint.stop_station
    earliest = init.station + braking_reach(min(init.speed, limits.v_max), -limits.a_min * dt, dt)
    if earliest > stop:
        logger.warning(
            "yield_stop_relaxed", stop_station=stop, reachable_stop=earliest, speed=init.speed
        )
        get_metrics().stop_relaxations.inc()
        stop = earliest
    return _maximize("optimal_yield", init, theta, cfg, limits, horizon, dt, stop, interacting)


def compose_pass_nonyield(
    optimal_pass: Trajectory,
    interacting_constant: Trajectory,
    limits: MotionLimits,
    dt: Optional[float] = None,
    clearance_margin: float = 0.0,
    opponent_clearance: float = 0.0,
) -> Tuple[Trajectory, int]:
    """
    The optimal pass followed up to step k0, then maximal braking.

    k0 is the largest step from which braking at a_min still halts at or before
    ``-clearance_margin``. No braking is needed (k0 equals the horizon) when the target never
    gets that close within the horizon or the opponent clears the crossing first, that is,
    passes station ``opponent_clearance`` before the target reaches the boundary. If no step
    from 1 on allows stopping in time, braking starts immediately and k0 is 0.
    """
    if len(optimal_pass) != len(interacting_constant):
        raise ValidationError("optimal pass and opponent rollout differ in length", field="interacting_constant")
    step = optimal_pass.dt if dt is None else dt
    stations = optimal_pass.stations
    horizon = len(stations)
    boundary = -clearance_margin
    if opponent_clearance < 0:
        raise ValidationError("opponent clearance must be non-negative", field="opponent_clearance")

    reached = np.flatnonzero(stations > boundary)
    cleared = np.flatnonzero(interacting_constant.stations > opponent_clearance)
    if reached.size == 0 or (cleared.size > 0 and cleared[0] <= reached[0]):
        return optimal_pass, horizon

    speeds = kinematics(optimal_pass).speeds
    drop = -limits.a_min * step
    k0 = 0
    for k in range(horizon - 1, 0, -1):
        if stations[k] + braking_reach(max(speeds[k], 0.0), drop, step) <= boundary:
            k0 = k
            break

    tail = braking_tail(stations[k0], max(float(speeds[k0]), 0.0), limits, step, horizon - 1 - k0)
    composed = np.concatenate((stations[: k0 + 1], tail))
    return Trajectory(composed, step), k0
