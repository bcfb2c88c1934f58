"""
Prospect Drive - Trajectory kinematics
Trajectory containers, backward-difference kinematics, frame slicing and time-to-collision.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np

from .exceptions import (
    InconsistentPairError,
    NotApproachingError,
    ValidationError,
    WindowTooLongError,
)
from .models import Decision

DEFAULT_DT = 0.1
DEFAULT_WINDOW = 10
# Below this speed a vehicle is treated as stopped (m/s)
SPEED_FLOOR = 1e-3


def _frozen_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float)
    if array.ndim != 1:
        raise ValidationError(f"{name} must be one-dimensional", field=name)
    if not np.all(np.isfinite(array)):
        raise ValidationError(f"{name} must be finite", field=name)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Uniformly sampled longitudinal stations of one vehicle in the shared frame"""
    stations: np.ndarray
    dt: float = DEFAULT_DT
    laterals: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        stations = _frozen_array(self.stations, "stations")
        if len(stations) < 2:
            raise ValidationError("a trajectory needs at least 2 samples", field="stations")
        if not self.dt > 0:
            raise ValidationError(f"dt must be positive, got {self.dt}", field="dt")
        object.__setattr__(self, "stations", stations)
        object.__setattr__(self, "dt", float(self.dt))
        if self.laterals is not None:
            laterals = _frozen_array(self.laterals, "laterals")
            if len(laterals) != len(stations):
                raise ValidationError("laterals and stations differ in length", field="laterals")
            object.__setattr__(self, "laterals", laterals)

    def __len__(self) -> int:
        return len(self.stations)

    @property
    def duration(self) -> float:
        return (len(self) - 1) * self.dt

    def window(self, start: int, length: int) -> "Trajectory":
        laterals = None if self.laterals is None else self.laterals[start:start + length]
        return Trajectory(self.stations[start:start + length], self.dt, laterals)

    def with_stations(self, stations: np.ndarray) -> "Trajectory":
        return Trajectory(stations, self.dt)


@dataclass(frozen=True, eq=False)
class KinematicProfile:
    speeds: np.ndarray
    accelerations: np.ndarray
    jerks: np.ndarray


@dataclass(frozen=True, eq=False)
class InteractionPair:
    """Target and interacting trajectories with an optional decision label"""
    pair_id: str
    target: Trajectory
    interacting: Trajectory
    label: Optional[Decision] = None

    def __post_init__(self):
        if len(self.target) != len(self.interacting):
            raise InconsistentPairError(
                self.pair_id,
                f"target has {len(self.target)} samples, interacting has {len(self.interacting)}",
            )
        if not np.isclose(self.target.dt, self.interacting.dt, rtol=0.0, atol=1e-9):
            raise InconsistentPairError(
                self.pair_id, f"dt differs ({self.target.dt} vs {self.interacting.dt})"
            )

    def __len__(self) -> int:
        return len(self.target)

    @property
    def dt(self) -> float:
        return self.target.dt


@dataclass(frozen=True, eq=False)
class Frame:
    """Fixed-length window of a pair; the unit of prediction"""
    pair_id: str
    start: int
    target: Trajectory
    interacting: Trajectory
    label: Optional[Decision] = None

    def __len__(self) -> int:
        return len(self.target)

    @classmethod
    def from_pair(cls, pair: InteractionPair) -> "Frame":
        """The whole pair as a single frame"""
        return cls(pair.pair_id, 0, pair.target, pair.interacting, pair.label)


def _backward(previous: np.ndarray, order: int, dt: float) -> np.ndarray:
    n = previous.shape[0]
    rows = np.zeros_like(previous)
    rows[order:] = (previous[order:] - previous[order - 1:-1]) / dt
    if n > order:
        rows[:order] = rows[order]
    return rows


@lru_cache(maxsize=64)
def _operators(n: int, dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    speed = _backward(np.eye(n), 1, dt)
    accel = _backward(speed, 2, dt)
    jerk = _backward(accel, 3, dt)
    for op in (speed, accel, jerk):
        op.setflags(write=False)
    return speed, accel, jerk


def difference_operators(n: int, dt: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Linear maps from ``n`` stations to speeds, accelerations and jerks.

    Entries before the first defined difference copy it forward; when a quantity has no
    defined entry at all (too few samples) its row block is zero.
    """
    if n < 2:
        raise ValidationError("difference operators need at least 2 samples", field="n")
    return _operators(int(n), float(dt))


def kinematics(traj: Trajectory) -> KinematicProfile:
    """Backward-difference speeds, accelerations and jerks, same length as the stations"""
    speed_op, accel_op, jerk_op = difference_operators(len(traj), traj.dt)
    return KinematicProfile(
        speeds=speed_op @ traj.stations,
        accelerations=accel_op @ traj.stations,
        jerks=jerk_op @ traj.stations,
    )


def slice_frames(pair: InteractionPair, window: int = DEFAULT_WINDOW, stride: int = 1) -> List[Frame]:
    """Sliding windows over a pair; each frame keeps the pair label"""
    if window < 2:
        raise ValidationError(f"window must be at least 2 samples, got {window}", field="window")
    if stride < 1:
        raise ValidationError(f"stride must be at least 1, got {stride}", field="stride")
    if window > len(pair):
        raise WindowTooLongError(window, len(pair))

    count = (len(pair) - window) // stride + 1
    return [
        Frame(
            pair_id=pair.pair_id,
            start=k * stride,
            target=pair.target.window(k * stride, window),
            interacting=pair.interacting.window(k * stride, window),
            label=pair.label,
        )
        for k in range(count)
    ]


def ttc(station: float, speed: float) -> float:
    """Seconds until the vehicle reaches the crossing at its current speed"""
    if speed <= SPEED_FLOOR or station >= 0.0:
        raise NotApproachingError(station, speed)
    return -station / speed
