"""Route specifications and the scenario library that populates a world."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geometry import Polyline, Pose2D, Segment, resample_equidistant
from ..route import (DEFAULT_RAMP, DEFAULT_SPACING, LANE_WIDTH, DensePath, RouteError,
                     SparseRoute, _left_normals, apply_lateral_shift, arc_points, densify)
from ..vehicle import CAR, VehicleParams
from .world import (DT, LaneFollower, Slowdown, StaticObstacle, StopSign, TrafficLight,
                    VehicleState, Walker, World)

SCENARIO_KINDS = (
    "PlainRoute",
    "ConstructionObstacleTwoWays",
    "SignalizedJunctionLeftTurn",
    "VehicleTurningRoutePedestrian",
    "DynamicObjectCrossing",
    "LeadVehicleSlowdown",
)
PEDESTRIAN_EXTENT = (0.6, 0.6)
CONE_EXTENT = (0.5, 0.5)
STOP_LINE_HALF = 0.5 * LANE_WIDTH


@dataclass(frozen=True)
class ScenarioSpec:
    kind: str
    trigger_arc_length: float
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCENARIO_KINDS:
            raise RouteError(f"unknown scenario kind {self.kind!r}")
        if self.trigger_arc_length < 0:
            raise RouteError("trigger_arc_length must be non-negative")


@dataclass
class RouteSpec:
    """A route: geometry from target points or line/arc primitives, a speed
    limit, its scenarios and optional constant-rate hazards (events per km)."""

    route_id: str
    target_points: list | None = None
    geometry: list | None = None
    start: tuple = (0.0, 0.0, 0.0)  # x, y, heading in degrees
    speed_limit: float = 20.0
    scenarios: list = field(default_factory=list)
    hazards: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.target_points is None) == (self.geometry is None):
            raise RouteError(f"route {self.route_id!r}: give exactly one of target_points or geometry")
        if not 0 < self.speed_limit <= 20.0:
            raise RouteError(f"route {self.route_id!r}: speed_limit must lie in (0, 20] m/s")
        for k, r in self.hazards.items():
            if k not in ("CP", "CV", "CL", "RL", "SI", "ST", "YE") or r < 0:
                raise RouteError(f"route {self.route_id!r}: bad hazard entry {k}={r}")

    def dense_path(self, spacing: float = DEFAULT_SPACING) -> DensePath:
        if self.target_points is not None:
            return densify(SparseRoute(self.target_points), spacing=spacing)
        pts = primitive_points(self.start, self.geometry)
        return DensePath(resample_equidistant(Polyline(pts), spacing))


def primitive_points(start, geometry, step: float = 0.25) -> list:
    """Chain of ``("line", length)`` and ``("arc", radius, degrees)`` pieces;
    positive degrees turn left."""
    x, y, h = float(start[0]), float(start[1]), math.radians(float(start[2]))
    pts = [(x, y)]
    for piece in geometry:
        kind = piece[0]
        if kind == "line":
            length = float(piece[1])
            if length <= 0:
                raise RouteError("line length must be positive")
            x, y = x + length * math.cos(h), y + length * math.sin(h)
            pts.append((x, y))
        elif kind == "arc":
            radius, sweep = float(piece[1]), math.radians(float(piece[2]))
            if radius <= 0 or sweep == 0:
                raise RouteError("arc needs a positive radius and a nonzero sweep")
            side = 1.0 if sweep > 0 else -1.0
            cx, cy = x - side * radius * math.sin(h), y + side * radius * math.cos(h)
            arc = arc_points((cx, cy), radius, h - side * math.pi / 2, sweep, step)
            pts.extend(arc[1:])
            x, y = arc[-1]
            h += sweep
        else:
            raise RouteError(f"unknown geometry primitive {kind!r}")
    return pts


# ------------------------------------------------------------------ frames

class _Frame:
    """Local frame on the base path at an arc length: x forward, y left."""

    def __init__(self, base: Polyline, arc: float):
        self.x, self.y, self.h = base.point_at(arc)
        self.arc = arc

    def world(self, lx: float, ly: float) -> tuple[float, float]:
        c, s = math.cos(self.h), math.sin(self.h)
        return self.x + c * lx - s * ly, self.y + s * lx + c * ly

    def pose(self, lx: float, ly: float, dyaw: float = 0.0) -> Pose2D:
        return Pose2D(*self.world(lx, ly), self.h + dyaw)

    def stop_line(self) -> Segment:
        return Segment(self.world(0.0, STOP_LINE_HALF), self.world(0.0, -STOP_LINE_HALF))


def _offset_lane(base: Polyline, offset: float, reverse: bool) -> Polyline:
    pts = base.points + offset * _left_normals(base)
    return Polyline(pts[::-1] if reverse else pts)


def _param(params: dict, key: str, default, rng=None, jitter=None):
    if key in params:
        return params[key]
    if rng is not None and jitter is not None:
        lo, hi = jitter
        return float(rng.uniform(lo, hi))
    return default


@dataclass
class Built:
    path: DensePath
    actors: list = field(default_factory=list)
    lights: list = field(default_factory=list)
    signs: list = field(default_factory=list)


# ----------------------------------------------------------------- builders

def _plain(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    if spec.parameters.get("stop_sign", False):
        fr = _Frame(b.path.base, spec.trigger_arc_length)
        b.signs.append(StopSign(fr.stop_line(), sign_id=f"{tag}.stop"))


def _construction(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    p = spec.parameters
    c = spec.trigger_arc_length
    length = float(_param(p, "obstacle_length", 20.0))
    before = float(_param(p, "shift_before", 15.0))
    after = float(_param(p, "shift_after", 15.0))
    offset = float(_param(p, "offset", LANE_WIDTH))
    ramp = float(_param(p, "ramp", DEFAULT_RAMP))
    spacing = float(_param(p, "cone_spacing", 2.0))
    base = b.path.base
    for k in range(int(math.floor(length / spacing)) + 1):
        fr = _Frame(base, c + k * spacing)
        b.actors.append(StaticObstacle(VehicleState(fr.pose(0.0, 0.0), extent=CONE_EXTENT,
                                                    kind="static_obstacle", actor_id=f"{tag}.cone{k}")))
    b.path = apply_lateral_shift(b.path, max(c - before, 0.0), min(c + length + after, base.length),
                                 offset, ramp)
    gap = float(_param(p, "oncoming_gap_s", 20.0, rng, (18.0, 24.0)))
    speed = float(_param(p, "oncoming_speed", 8.0, rng, (7.0, 9.0)))
    count = int(_param(p, "oncoming_count", 6))
    phase = float(_param(p, "oncoming_phase_s", 0.0, rng, (0.0, gap)))
    lane = _offset_lane(base, offset, reverse=True)
    for k in range(count):
        st = VehicleState(Pose2D(0, 0), speed=speed, kind="background_vehicle",
                          actor_id=f"{tag}.oncoming{k}")
        b.actors.append(LaneFollower(st, lane, 0.0, speed, spawn_time=phase + k * gap))


def _signalized_left(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    p = spec.parameters
    fr = _Frame(b.path.base, spec.trigger_arc_length)
    radius = float(_param(p, "trigger_radius", 30.0))
    red = float(_param(p, "red_s", 6.0, rng, (4.0, 8.0)))
    b.lights.append(TrafficLight(fr.stop_line(), [("red", red), ("green", 1e9)], loop=False,
                                 trigger_radius=radius, light_id=f"{tag}.light"))
    speed = float(_param(p, "oncoming_speed", 9.0, rng, (8.0, 10.0)))
    delay = float(_param(p, "oncoming_delay_s", 1.5, rng, (0.5, 2.5)))
    gap = float(_param(p, "oncoming_gap_s", 3.0, rng, (2.5, 4.0)))
    count = int(_param(p, "oncoming_count", 2))
    ahead = float(_param(p, "oncoming_lane_ahead", 250.0))
    lateral = float(_param(p, "oncoming_lateral", LANE_WIDTH))
    conflict = float(_param(p, "conflict_x", 6.0))
    lane = Polyline([fr.world(ahead, lateral), fr.world(-150.0, lateral)])
    for k in range(count):
        start = (ahead - conflict) - speed * (red + delay + k * gap)
        st = VehicleState(Pose2D(0, 0), speed=speed, kind="background_vehicle",
                          actor_id=f"{tag}.oncoming{k}")
        b.actors.append(_TriggeredFollower(st, lane, max(start, 0.0), speed,
                                           trigger_point=fr.world(0.0, 0.0), trigger_radius=radius))


def _crossing_walker(spec: ScenarioSpec, b: Built, rng, tag: str, start_lat: float,
                     end_lat: float, pause_lat: float | None, pause_s: float) -> Walker:
    p = spec.parameters
    fr = _Frame(b.path.base, spec.trigger_arc_length)
    speed = float(_param(p, "pedestrian_speed", 1.4, rng, (1.2, 1.6)))
    radius = float(_param(p, "trigger_radius", 30.0))
    start, end = fr.world(0.0, start_lat), fr.world(0.0, end_lat)
    pause_at = None if pause_lat is None else abs(pause_lat - start_lat)
    st = VehicleState(Pose2D(*start, fr.h), extent=PEDESTRIAN_EXTENT, kind="pedestrian",
                      actor_id=f"{tag}.pedestrian")
    return Walker(st, start, end, speed, fr.world(0.0, 0.0), radius, pause_at, pause_s)


def _turning_pedestrian(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    p = spec.parameters
    start_lat = float(_param(p, "start_lateral", -6.0))
    end_lat = float(_param(p, "end_lateral", 6.0))
    b.actors.append(_crossing_walker(spec, b, rng, tag, start_lat, end_lat, None, 0.0))


def _dynamic_crossing(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    p = spec.parameters
    start_lat = float(_param(p, "start_lateral", -4.5))
    end_lat = float(_param(p, "end_lateral", 4.5))
    pause_lat = float(_param(p, "pause_lateral", 0.0))
    pause_s = float(_param(p, "pause_s", 6.0, rng, (5.0, 8.0)))
    b.actors.append(_crossing_walker(spec, b, rng, tag, start_lat, end_lat, pause_lat, pause_s))
    occ = p.get("occluder", {})
    fr = _Frame(b.path.base, spec.trigger_arc_length + float(occ.get("dx", -6.0)))
    length, width = float(occ.get("length", 4.5)), float(occ.get("width", 1.9))
    b.actors.append(StaticObstacle(VehicleState(fr.pose(0.0, float(occ.get("dy", -3.2))),
                                                extent=(length, width), kind="background_vehicle",
                                                actor_id=f"{tag}.parked")))


def _lead_slowdown(spec: ScenarioSpec, b: Built, rng, tag: str) -> None:
    p = spec.parameters
    start = float(_param(p, "lead_start", 30.0))
    cruise = float(_param(p, "lead_speed", 10.0, rng, (9.0, 11.0)))
    decel = float(_param(p, "decel", 4.0, rng, (3.0, 5.0)))
    hold = float(_param(p, "hold_s", 5.0, rng, (3.0, 7.0)))
    st = VehicleState(Pose2D(0, 0), speed=cruise, kind="background_vehicle", actor_id=f"{tag}.lead")
    b.actors.append(LaneFollower(st, b.path.base, start, cruise,
                                 slowdown=Slowdown(spec.trigger_arc_length, decel, hold)))


class _TriggeredFollower(LaneFollower):
    """Lane follower that appears once the ego is near a trigger point."""

    def __init__(self, state, lane, start_arc, cruise, trigger_point, trigger_radius):
        super().__init__(state, lane, start_arc, cruise, spawn_time=math.inf)
        self.trigger_point = trigger_point
        self.trigger_radius = trigger_radius

    def update(self, world, dt):
        if not self.active and not self.done:
            ex, ey = world.ego.pose.x, world.ego.pose.y
            if math.hypot(ex - self.trigger_point[0], ey - self.trigger_point[1]) > self.trigger_radius:
                return
            self.spawn_time = world.time
        super().update(world, dt)


BUILDERS = {
    "PlainRoute": _plain,
    "ConstructionObstacleTwoWays": _construction,
    "SignalizedJunctionLeftTurn": _signalized_left,
    "VehicleTurningRoutePedestrian": _turning_pedestrian,
    "DynamicObjectCrossing": _dynamic_crossing,
    "LeadVehicleSlowdown": _lead_slowdown,
}


def hazard_arcs(hazards: dict, length: float, rng) -> list:
    """Poisson-spaced hazard positions (arc, type) for per-km rates."""
    out = []
    for kind in sorted(hazards):
        rate = float(hazards[kind])
        if rate <= 0:
            continue
        mean_gap = 1000.0 / rate
        s = float(rng.exponential(mean_gap))
        while s <= length:
            out.append((s, kind))
            s += float(rng.exponential(mean_gap))
    return sorted(out)


def build_world(route: RouteSpec, seed: int = 0, dt: float = DT, vehicle: VehicleParams = CAR,
                scenarios=None) -> World:
    """Instantiate a world for ``route``; ``seed`` jitters unset scenario parameters."""
    rng = np.random.default_rng(seed)
    scen = route.scenarios if scenarios is None else list(scenarios)
    path = route.dense_path()
    built = Built(path)
    for i, spec in enumerate(scen):
        if spec.trigger_arc_length > path.length:
            raise RouteError(f"route {route.route_id!r}: scenario {i} trigger "
                             f"{spec.trigger_arc_length} beyond route length {path.length:.1f}")
        BUILDERS[spec.kind](spec, built, rng, f"s{i}")
    hazards = hazard_arcs(route.hazards, built.path.length, rng) if route.hazards else []
    poly = built.path.polyline
    x, y, h = poly.point_at(0.0)
    ego = VehicleState(Pose2D(x, y, h), extent=(vehicle.length, vehicle.width))
    return World(route.route_id, poly, ego, built.actors, built.lights, built.signs,
                 speed_limit=route.speed_limit, hazards=hazards, dt=dt, vehicle=vehicle,
                 shift_segments=built.path.shift_segments)
