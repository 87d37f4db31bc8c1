"""Dense route construction: sparse target points to an equidistant path,
optional A* over a lane graph, and scenario-induced lateral shifts."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .geometry import Polyline, resample_equidistant

DEFAULT_SPACING = 1.0
DEFAULT_RAMP = 10.0
LANE_WIDTH = 3.5


class RouteError(ValueError):
    pass


@dataclass(frozen=True)
class SparseRoute:
    target_points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        pts = tuple((float(x), float(y)) for x, y in self.target_points)
        if len(pts) < 2:
            raise RouteError("a route needs at least two target points")
        object.__setattr__(self, "target_points", pts)


@dataclass(frozen=True)
class ShiftSegment:
    start_arc: float
    end_arc: float
    offset: float
    ramp: float


@dataclass
class LaneGraph:
    """Directed lane graph; nodes are (x, y) positions keyed by id."""

    nodes: dict = field(default_factory=dict)
    edges: list = field(default_factory=list)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        for k, (x, y) in self.nodes.items():
            g.add_node(k, pos=(float(x), float(y)))
        for u, v in self.edges:
            (x0, y0), (x1, y1) = self.nodes[u], self.nodes[v]
            g.add_edge(u, v, weight=math.hypot(x1 - x0, y1 - y0))
        return g

    def nearest_node(self, p):
        return min(self.nodes, key=lambda k: math.hypot(self.nodes[k][0] - p[0], self.nodes[k][1] - p[1]))


class DensePath:
    """Equidistant base polyline plus the lateral shifts rendered onto it."""

    def __init__(self, base: Polyline, shift_segments=()):
        self.base = base
        self.shift_segments: tuple[ShiftSegment, ...] = tuple(shift_segments)
        self.polyline = _render(base, self.shift_segments)

    @property
    def length(self) -> float:
        return self.polyline.length

    def __repr__(self) -> str:
        return f"DensePath(length={self.length:.2f}, shifts={len(self.shift_segments)})"


def _left_normals(base: Polyline) -> np.ndarray:
    pts = base.points
    tang = np.empty_like(pts)
    tang[1:-1] = pts[2:] - pts[:-2]
    tang[0] = pts[1] - pts[0]
    tang[-1] = pts[-1] - pts[-2]
    tang /= np.hypot(tang[:, 0], tang[:, 1])[:, None]
    return np.column_stack([-tang[:, 1], tang[:, 0]])


def blend_weight(s, seg: ShiftSegment):
    """Cosine ramp in, plateau of 1, cosine ramp out; 0 outside the segment."""
    s = np.asarray(s, dtype=float)
    w = np.zeros_like(s)
    if seg.ramp > 0:
        up = (s >= seg.start_arc) & (s < seg.start_arc + seg.ramp)
        w[up] = 0.5 * (1.0 - np.cos(np.pi * (s[up] - seg.start_arc) / seg.ramp))
        down = (s > seg.end_arc - seg.ramp) & (s <= seg.end_arc)
        w[down] = 0.5 * (1.0 - np.cos(np.pi * (seg.end_arc - s[down]) / seg.ramp))
    flat = (s >= seg.start_arc + seg.ramp) & (s <= seg.end_arc - seg.ramp)
    w[flat] = 1.0
    return w


def _render(base: Polyline, segments) -> Polyline:
    if not segments:
        return base
    normals = _left_normals(base)
    disp = np.zeros(len(base))
    for seg in segments:
        disp += seg.offset * blend_weight(base.cum, seg)
    return Polyline(base.points + disp[:, None] * normals)


def densify(route: SparseRoute, lane_graph: LaneGraph | None = None,
            spacing: float = DEFAULT_SPACING) -> DensePath:
    tps = route.target_points
    if lane_graph is None:
        pts = list(tps)
    else:
        pts = _astar_points(tps, lane_graph)
    dedup = [pts[0]]
    for p in pts[1:]:
        if math.hypot(p[0] - dedup[-1][0], p[1] - dedup[-1][1]) > 1e-9:
            dedup.append(p)
    return DensePath(resample_equidistant(Polyline(dedup), spacing))


def _astar_points(tps, lane_graph: LaneGraph) -> list:
    g = lane_graph.to_networkx()
    pos = nx.get_node_attributes(g, "pos")

    def h(u, v):
        return math.hypot(pos[u][0] - pos[v][0], pos[u][1] - pos[v][1])

    nodes = [lane_graph.nearest_node(p) for p in tps]
    pts = [pos[nodes[0]]]
    for i in range(1, len(nodes)):
        try:
            seq = nx.astar_path(g, nodes[i - 1], nodes[i], heuristic=h, weight="weight")
        except nx.NetworkXNoPath:
            raise RouteError(f"target point {i} is unreachable from target point {i - 1}") from None
        pts.extend(pos[k] for k in seq[1:])
    return pts


def apply_lateral_shift(path: DensePath, start_arc: float, end_arc: float,
                        offset: float, ramp: float = DEFAULT_RAMP) -> DensePath:
    """Displace ``[start_arc, end_arc]`` of the base path along its left normal.

    Re-applying a segment with identical bounds adds the offsets (a zero sum
    removes it), which makes shifts exactly reversible; any other overlap with
    an existing segment is an error.
    """
    length = path.base.length
    if not (0.0 <= start_arc < end_arc <= length + 1e-9):
        raise RouteError(f"shift [{start_arc}, {end_arc}] outside path of length {length:.3f}")
    if ramp < 0 or ramp > 0.5 * (end_arc - start_arc) + 1e-12:
        raise RouteError("ramp must lie in [0, (end_arc - start_arc) / 2]")
    segs = list(path.shift_segments)
    for i, seg in enumerate(segs):
        if (seg.start_arc, seg.end_arc, seg.ramp) == (start_arc, end_arc, ramp):
            total = seg.offset + offset
            if total == 0.0:
                del segs[i]
            else:
                segs[i] = ShiftSegment(start_arc, end_arc, total, ramp)
            return DensePath(path.base, segs)
        if start_arc < seg.end_arc and seg.start_arc < end_arc:
            raise RouteError(
                f"shift [{start_arc}, {end_arc}] overlaps existing [{seg.start_arc}, {seg.end_arc}]"
            )
    if offset == 0.0:
        return path
    segs.append(ShiftSegment(float(start_arc), float(end_arc), float(offset), float(ramp)))
    segs.sort(key=lambda s: s.start_arc)
    return DensePath(path.base, segs)


def arc_points(center, radius: float, start_angle: float, sweep: float, step: float = 0.25):
    """Points on a circular arc; ``sweep`` > 0 turns left."""
    n = max(2, int(math.ceil(abs(sweep) * radius / step)) + 1)
    ang = start_angle + np.linspace(0.0, sweep, n)
    return list(zip(center[0] + radius * np.cos(ang), center[1] + radius * np.sin(ang)))
