"""
Prospect Drive - Frenet geometry
Polyline reference paths, arc-length projection and the shared crossing-point frame.

Stations are signed arc lengths measured from the crossing of two reference paths, so both
vehicles have negative stations before the conflict point and positive ones after it.
Lateral offsets are positive to the left of the direction of travel.
"""

from dataclasses import dataclass, field
from typing import Iterable, List, NamedTuple, Sequence, Tuple

import numpy as np

from .exceptions import NoCrossingError, ValidationError

# Intersections within this parametric slack of a segment end still count
_SEGMENT_EPS = 1e-12


class Point2(NamedTuple):
    x: float
    y: float


class FrenetPose(NamedTuple):
    station: float
    lateral: float


@dataclass(frozen=True)
class CrossingPoint:
    """Intersection of two reference paths"""
    station_on_a: float
    station_on_b: float
    location: Point2


@dataclass(frozen=True, eq=False)
class ReferencePath:
    """
    Polyline reference path.

    Build with ``ReferencePath.from_points``; vertices are an (n, 2) array and
    ``cumulative_arclength[i]`` is the arc length at vertex ``i``.
    """
    vertices: np.ndarray
    cumulative_arclength: np.ndarray = field(repr=False)
    path_id: str = "path"

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]], path_id: str = "path") -> "ReferencePath":
        vertices = np.asarray([tuple(p) for p in points], dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != 2 or len(vertices) < 2:
            raise ValidationError(f"path '{path_id}' needs at least 2 vertices", field="vertices")
        if not np.all(np.isfinite(vertices)):
            raise ValidationError(f"path '{path_id}' has non-finite vertices", field="vertices")
        lengths = np.hypot(*np.diff(vertices, axis=0).T)
        if np.any(lengths == 0.0):
            raise ValidationError(f"path '{path_id}' repeats a vertex", field="vertices")
        cumulative = np.concatenate(([0.0], np.cumsum(lengths)))
        return cls(vertices=vertices, cumulative_arclength=cumulative, path_id=path_id)

    @property
    def length(self) -> float:
        return float(self.cumulative_arclength[-1])

    @property
    def segment_count(self) -> int:
        return len(self.vertices) - 1

    def point_at(self, arclength: float) -> Point2:
        """Cartesian point at an arc length, clamped to the path ends"""
        s = min(max(float(arclength), 0.0), self.length)
        i = int(np.searchsorted(self.cumulative_arclength, s, side="right")) - 1
        i = min(max(i, 0), self.segment_count - 1)
        a, b = self.vertices[i], self.vertices[i + 1]
        seg_len = self.cumulative_arclength[i + 1] - self.cumulative_arclength[i]
        t = (s - self.cumulative_arclength[i]) / seg_len
        x, y = a + t * (b - a)
        return Point2(float(x), float(y))


def project_to_path(path: ReferencePath, point: Sequence[float]) -> Tuple[float, float]:
    """
    Project a point onto the closest point of the polyline.

    Returns ``(arclength, lateral)``. Points beyond either end clamp to that end's arc length;
    the lateral offset is then measured from the end segment's line.
    """
    p = np.asarray(point, dtype=float)
    starts = path.vertices[:-1]
    deltas = path.vertices[1:] - starts
    seg_len_sq = np.einsum("ij,ij->i", deltas, deltas)

    rel = p - starts
    t = np.clip(np.einsum("ij,ij->i", rel, deltas) / seg_len_sq, 0.0, 1.0)
    feet = starts + t[:, None] * deltas
    distances = np.hypot(*(p - feet).T)

    i = int(np.argmin(distances))
    seg_len = np.sqrt(seg_len_sq[i])
    arclength = path.cumulative_arclength[i] + t[i] * seg_len
    # left of travel is positive
    lateral = (deltas[i, 0] * rel[i, 1] - deltas[i, 1] * rel[i, 0]) / seg_len
    return float(arclength), float(lateral)


def _cross(u: np.ndarray, v: np.ndarray) -> float:
    return float(u[0] * v[1] - u[1] * v[0])


def _segment_intersections(
    p: np.ndarray, r: np.ndarray, q: np.ndarray, s: np.ndarray
) -> List[Tuple[float, float]]:
    """Parameters (t, u) with p + t r == q + u s, both in [0, 1]"""
    denom = _cross(r, s)
    qp = q - p
    if abs(denom) > _SEGMENT_EPS * np.hypot(*r) * np.hypot(*s):
        t = _cross(qp, s) / denom
        u = _cross(qp, r) / denom
        if -_SEGMENT_EPS <= t <= 1 + _SEGMENT_EPS and -_SEGMENT_EPS <= u <= 1 + _SEGMENT_EPS:
            return [(min(max(t, 0.0), 1.0), min(max(u, 0.0), 1.0))]
        return []

    # parallel: only collinear overlaps intersect
    if abs(_cross(qp, r)) > _SEGMENT_EPS * max(np.hypot(*r), 1.0) * max(np.hypot(*qp), 1.0):
        return []
    rr = float(np.dot(r, r))
    t0 = float(np.dot(qp, r)) / rr
    t1 = t0 + float(np.dot(s, r)) / rr
    lo, hi = max(0.0, min(t0, t1)), min(1.0, max(t0, t1))
    if lo > hi:
        return []
    ss = float(np.dot(s, s))
    u = float(np.dot(p + lo * r - q, s)) / ss
    return [(lo, min(max(u, 0.0), 1.0))]


def find_crossing(path_a: ReferencePath, path_b: ReferencePath) -> CrossingPoint:
    """
    First intersection of two polylines.

    Ties on the station along ``path_a`` break on the station along ``path_b``.
    """
    candidates: List[CrossingPoint] = []
    for i in range(path_a.segment_count):
        p = path_a.vertices[i]
        r = path_a.vertices[i + 1] - p
        len_a = path_a.cumulative_arclength[i + 1] - path_a.cumulative_arclength[i]
        for j in range(path_b.segment_count):
            q = path_b.vertices[j]
            s = path_b.vertices[j + 1] - q
            len_b = path_b.cumulative_arclength[j + 1] - path_b.cumulative_arclength[j]
            for t, u in _segment_intersections(p, r, q, s):
                x, y = p + t * r
                candidates.append(
                    CrossingPoint(
                        station_on_a=float(path_a.cumulative_arclength[i] + t * len_a),
                        station_on_b=float(path_b.cumulative_arclength[j] + u * len_b),
                        location=Point2(float(x), float(y)),
                    )
                )

    if not candidates:
        raise NoCrossingError(path_a.path_id, path_b.path_id)
    return min(candidates, key=lambda c: (c.station_on_a, c.station_on_b))


def to_shared_frenet(
    path: ReferencePath,
    crossing_station: float,
    cartesian_points: Iterable[Tuple[float, Sequence[float]]],
) -> List[Tuple[float, FrenetPose]]:
    """Convert timed Cartesian points to poses whose station is zero at the crossing"""
    if not 0.0 <= crossing_station <= path.length:
        raise ValidationError(
            f"crossing station {crossing_station} outside path '{path.path_id}' [0, {path.length}]",
            field="crossing_station",
        )
    poses = []
    for time, point in cartesian_points:
        arclength, lateral = project_to_path(path, point)
        poses.append((time, FrenetPose(arclength - crossing_station, lateral)))
    return poses
