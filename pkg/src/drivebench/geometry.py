"""Planar poses, polylines and oriented boxes."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


def normalize_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    return math.pi - (math.pi - a) % (2.0 * math.pi)


@dataclass(frozen=True)
class Pose2D:
    x: float
    y: float
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "yaw", normalize_angle(float(self.yaw)))

    def to_local(self, px: float, py: float) -> tuple[float, float]:
        """Express a world point in this pose's frame."""
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        dx, dy = px - self.x, py - self.y
        return c * dx + s * dy, -s * dx + c * dy

    def to_world(self, lx: float, ly: float) -> tuple[float, float]:
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        return self.x + c * lx - s * ly, self.y + s * lx + c * ly


@dataclass(frozen=True)
class OrientedBox:
    center: Pose2D
    half_length: float
    half_width: float

    def __post_init__(self):
        if not (self.half_length > 0 and self.half_width > 0):
            raise ValueError("box half extents must be strictly positive")

    def as_array(self) -> np.ndarray:
        c = self.center
        return np.array([c.x, c.y, c.yaw, self.half_length, self.half_width])

    @classmethod
    def from_array(cls, row) -> "OrientedBox":
        return cls(Pose2D(row[0], row[1], row[2]), float(row[3]), float(row[4]))

    def corners(self) -> np.ndarray:
        """Corners in counter-clockwise order starting front-left."""
        hl, hw = self.half_length, self.half_width
        local = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
        return np.array([self.center.to_world(lx, ly) for lx, ly in local])


def obb_intersects(a: OrientedBox, b: OrientedBox) -> bool:
    """Separating-axis test on the four box axes; touching boxes intersect."""
    return bool(kernels.obb_overlap(a.as_array(), b.as_array()))


class Polyline:
    """Ordered 2D points with cumulative arc length."""

    __slots__ = ("points", "cum")

    def __init__(self, points):
        pts = np.array(points, dtype=float).reshape(-1, 2)
        if pts.shape[0] < 2:
            raise ValueError("polyline needs at least two points")
        seg = np.hypot(*np.diff(pts, axis=0).T)
        if np.any(seg <= 0.0):
            raise ValueError("polyline has repeated consecutive points")
        pts.setflags(write=False)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        cum.setflags(write=False)
        self.points = pts
        self.cum = cum

    @property
    def length(self) -> float:
        return float(self.cum[-1])

    @property
    def xs(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 0])

    @property
    def ys(self) -> np.ndarray:
        return np.ascontiguousarray(self.points[:, 1])

    def __len__(self) -> int:
        return self.points.shape[0]

    def __repr__(self) -> str:
        return f"Polyline(n={len(self)}, length={self.length:.3f})"

    def point_at(self, s: float) -> tuple[float, float, float]:
        """(x, y, heading) at arc length ``s``, extrapolated beyond the ends."""
        x, y, h = kernels.point_at_arc(self.xs, self.ys, np.asarray(self.cum), float(s))
        return float(x), float(y), float(h)

    def heading_at(self, s: float) -> float:
        return self.point_at(s)[2]


def project_onto(path: Polyline, p) -> tuple[float, float]:
    """Arc length of the closest path point and signed lateral offset (left +)."""
    arc, lat, _ = kernels.project_window(
        path.xs, path.ys, np.asarray(path.cum), float(p[0]), float(p[1]), 0, len(path) - 1
    )
    return float(arc), float(lat)


def resample_equidistant(path: Polyline, spacing: float) -> Polyline:
    """Points every ``spacing`` metres along the path, plus the end point.

    The final gap may be shorter than ``spacing``; it is dropped only when it
    would be shorter than 1e-9 m.
    """
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    total = path.length
    if total < spacing:
        raise ValueError(f"path length {total:.6g} m is shorter than spacing {spacing} m")
    n_full = int(math.floor(total / spacing + 1e-9))
    s = np.arange(n_full + 1) * spacing
    s = s[s <= total]
    if total - s[-1] > 1e-9:
        s = np.append(s, total)
    else:
        s[-1] = total
    xs, ys = _interp_arcs(path, s)
    return Polyline(np.column_stack([xs, ys]))


def _interp_arcs(path: Polyline, s: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    cum = path.cum
    idx = np.clip(np.searchsorted(cum, s, side="right") - 1, 0, len(path) - 2)
    t = (s - cum[idx]) / (cum[idx + 1] - cum[idx])
    p0 = path.points[idx]
    p1 = path.points[idx + 1]
    pts = p0 + t[:, None] * (p1 - p0)
    return pts[:, 0], pts[:, 1]


@dataclass(frozen=True)
class Segment:
    """Line segment between two points, used for stop lines."""

    a: tuple[float, float]
    b: tuple[float, float]

    def crossed_by(self, p0, p1) -> bool:
        """True when the motion p0 -> p1 crosses or lands on this segment."""
        return motion_crosses(p0, p1, self.a, self.b)


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def motion_crosses(p0, p1, q0, q1) -> bool:
    """Whether the step p0 -> p1 reaches segment q0-q1 from one side.

    A step that starts on the segment does not count; the previous step did.
    """
    d1 = _orient(q0, q1, p0)
    d2 = _orient(q0, q1, p1)
    if d1 == 0 or d1 * d2 > 0:
        return False
    return _orient(p0, p1, q0) * _orient(p0, p1, q1) <= 0
