"""Fixed-timestep 2D world: actors, traffic lights, stop signs, infractions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import kernels
from ..geometry import OrientedBox, Polyline, Pose2D, Segment
from ..planner import IdmParams, PathCache, idm_acceleration
from ..vehicle import CAR, VehicleParams

DT = 0.05
INFRACTION_TYPES = ("CP", "CV", "CL", "RL", "SI", "ST", "YE")
ACTOR_KINDS = ("ego", "background_vehicle", "pedestrian", "static_obstacle", "emergency_vehicle")
STOP_SPEED = 0.1
STOP_SIGN_RANGE = 3.0


@dataclass
class VehicleState:
    pose: Pose2D
    speed: float = 0.0
    steering: float = 0.0
    acceleration_command: float = 0.0
    extent: tuple = (CAR.length, CAR.width)
    kind: str = "ego"
    actor_id: str = "ego"

    def __post_init__(self):
        if self.kind not in ACTOR_KINDS:
            raise ValueError(f"unknown actor kind {self.kind!r}")
        if self.speed < 0:
            raise ValueError("speed must be non-negative")
        if not (self.extent[0] > 0 and self.extent[1] > 0):
            raise ValueError("extent must be positive")
        self.extent = (float(self.extent[0]), float(self.extent[1]))

    def box(self) -> OrientedBox:
        return OrientedBox(self.pose, 0.5 * self.extent[0], 0.5 * self.extent[1])

    def box_array(self) -> np.ndarray:
        p = self.pose
        return np.array([p.x, p.y, p.yaw, 0.5 * self.extent[0], 0.5 * self.extent[1]])

    def front_axle(self, lf: float = CAR.lf) -> tuple[float, float]:
        return self.pose.to_world(lf, 0.0)


@dataclass
class TrafficLight:
    stop_line: Segment
    schedule: list  # [(phase, seconds)], phase in {"red", "green"}
    loop: bool = True
    trigger_radius: float | None = None  # hold the first phase until the ego is this close
    light_id: str = "tl"
    phase_index: int = 0
    time_in_phase: float = 0.0
    started: bool = False

    def __post_init__(self):
        if not self.schedule or any(d <= 0 for _, d in self.schedule):
            raise ValueError("traffic light schedule needs positive durations")
        for ph, _ in self.schedule:
            if ph not in ("red", "green"):
                raise ValueError(f"unknown light phase {ph!r}")
        self.started = self.trigger_radius is None

    @property
    def phase(self) -> str:
        return self.schedule[self.phase_index][0]

    @property
    def midpoint(self) -> tuple[float, float]:
        a, b = self.stop_line.a, self.stop_line.b
        return 0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])

    def advance(self, dt: float, ego_xy) -> None:
        if not self.started:
            mx, my = self.midpoint
            if math.hypot(ego_xy[0] - mx, ego_xy[1] - my) <= self.trigger_radius:
                self.started = True
            return
        self.time_in_phase += dt
        while self.time_in_phase >= self.schedule[self.phase_index][1] - 1e-12:
            last = self.phase_index == len(self.schedule) - 1
            if last and not self.loop:
                return
            self.time_in_phase -= self.schedule[self.phase_index][1]
            self.phase_index = (self.phase_index + 1) % len(self.schedule)


@dataclass
class StopSign:
    stop_line: Segment
    sign_id: str = "stop"
    served: bool = False


# ------------------------------------------------------------------ actors

class Actor:
    """A world participant with a behaviour policy."""

    def __init__(self, state: VehicleState, active: bool = True):
        self.state = state
        self.active = active
        self.done = False

    @property
    def actor_id(self) -> str:
        return self.state.actor_id

    def update(self, world: "World", dt: float) -> None:
        pass


class StaticObstacle(Actor):
    pass


@dataclass
class Slowdown:
    """Scripted braking: at lane arc ``trigger_arc`` brake to a stop, hold, resume."""

    trigger_arc: float
    decel: float = 4.0
    hold_s: float = 5.0
    phase: str = "idle"  # idle -> braking -> holding -> resumed
    held: float = 0.0


BACKGROUND_IDM = IdmParams(v0_max=20.0, T=1.0, s0=3.0, a_max=2.0, b_comf=3.0,
                           stop_margin_pedestrian=4.0)


class LaneFollower(Actor):
    """Background vehicle driving along its own lane with IDM car-following."""

    def __init__(self, state: VehicleState, lane: Polyline, start_arc: float, cruise: float,
                 spawn_time: float = 0.0, slowdown: Slowdown | None = None,
                 idm: IdmParams = BACKGROUND_IDM, vehicle: VehicleParams = CAR,
                 max_decel: float = 6.0):
        super().__init__(state, active=spawn_time <= 0.0)
        self.lane = PathCache(lane)
        self.arc = float(start_arc)
        self.cruise = float(cruise)
        self.spawn_time = float(spawn_time)
        self.slowdown = slowdown
        self.idm = idm
        self.vehicle = vehicle
        self.max_decel = max_decel
        self._place()

    def _place(self):
        x, y, h = kernels.point_at_arc(self.lane.xs, self.lane.ys, self.lane.cum, self.arc)
        self.state.pose = Pose2D(float(x), float(y), float(h))
        i = min(int(np.searchsorted(self.lane.cum, self.arc)), len(self.lane.curvature) - 1)
        turn = 0.0
        if 0 < i < len(self.lane.xs) - 1:
            h0 = math.atan2(self.lane.ys[i] - self.lane.ys[i - 1], self.lane.xs[i] - self.lane.xs[i - 1])
            h1 = math.atan2(self.lane.ys[i + 1] - self.lane.ys[i], self.lane.xs[i + 1] - self.lane.xs[i])
            turn = math.copysign(1.0, math.sin(h1 - h0))
        self.state.steering = turn * math.atan(self.vehicle.wheelbase * self.lane.curvature[i])
        self.lane.hint = max(0, i - 1)

    def leader_gap(self, world: "World", lookahead: float = 40.0):
        others = [a.state for a in world.active_actors() if a is not self and a.state.kind != "pedestrian"]
        others.append(world.ego)
        peds = [a.state for a in world.active_actors() if a.state.kind == "pedestrian"]
        boxes = np.array([o.box_array() for o in others + peds])[:, None, :]
        seg = int(np.searchsorted(self.lane.cum, self.arc, side="right")) - 1
        arcs, _ = kernels.corridor_hits(boxes, self.lane.xs, self.lane.ys, self.lane.cum,
                                        max(seg, 0), self.arc + lookahead, 0.5 * self.state.extent[1] + 0.3)
        front = self.arc + 0.5 * self.state.extent[0]
        gap, speed = math.inf, 0.0
        for i in np.flatnonzero(np.isfinite(arcs)):
            g = arcs[i] - front
            if g < gap and arcs[i] > self.arc:
                o = (others + peds)[i]
                _, _, h = kernels.point_at_arc(self.lane.xs, self.lane.ys, self.lane.cum, arcs[i])
                gap, speed = g, o.speed * math.cos(o.pose.yaw - h)
        return gap, speed

    def update(self, world: "World", dt: float) -> None:
        if self.done:
            return
        if not self.active:
            if world.time + 1e-9 >= self.spawn_time:
                self.active = True
            else:
                return
        v = self.state.speed
        sd = self.slowdown
        if sd is not None and sd.phase == "idle" and self.arc >= sd.trigger_arc:
            sd.phase = "braking"
        if sd is not None and sd.phase == "braking":
            a = -sd.decel
            if v + a * dt <= 0.0:
                sd.phase = "holding"
        elif sd is not None and sd.phase == "holding":
            a = 0.0
            sd.held += dt
            if sd.held >= sd.hold_s:
                sd.phase = "resumed"
        else:
            gap, lead_v = self.leader_gap(world)
            if gap <= 0.0:
                a = -self.max_decel
            else:
                a = idm_acceleration(v, gap, lead_v, self.idm, v0=max(self.cruise, 0.1))
            a = min(max(a, -self.max_decel), self.idm.a_max)
        v_new = max(v + a * dt, 0.0)
        self.arc += 0.5 * (v + v_new) * dt
        self.state.speed = v_new
        self.state.acceleration_command = (v_new - v) / dt
        self._place()
        if self.arc > self.lane.path.length:
            self.done = True
            self.active = False


class Walker(Actor):
    """Pedestrian that starts walking once the ego is within ``trigger_radius``
    of ``trigger_point``; optionally pauses part-way."""

    def __init__(self, state: VehicleState, start, end, speed: float, trigger_point,
                 trigger_radius: float = 30.0, pause_at: float | None = None,
                 pause_s: float = 0.0):
        super().__init__(state, active=False)
        self.start = np.asarray(start, dtype=float)
        self.end = np.asarray(end, dtype=float)
        self.walk_speed = float(speed)
        self.trigger_point = tuple(trigger_point)
        self.trigger_radius = float(trigger_radius)
        self.pause_at = pause_at
        self.pause_s = float(pause_s)
        self.walked = 0.0
        self.paused = 0.0
        d = self.end - self.start
        self.total = float(np.hypot(*d))
        self.heading = math.atan2(d[1], d[0])
        self.state.pose = Pose2D(float(self.start[0]), float(self.start[1]), self.heading)
        self.state.speed = 0.0

    def update(self, world: "World", dt: float) -> None:
        if self.done:
            return
        if not self.active:
            ex, ey = world.ego.pose.x, world.ego.pose.y
            if math.hypot(ex - self.trigger_point[0], ey - self.trigger_point[1]) <= self.trigger_radius:
                self.active = True
                self.state.speed = self.walk_speed
            return
        pausing = (self.pause_at is not None and self.walked >= self.pause_at
                   and self.paused < self.pause_s)
        if pausing:
            self.paused += dt
            self.state.speed = 0.0 if self.paused < self.pause_s else self.walk_speed
            return
        step = self.walk_speed * dt
        if self.pause_at is not None and self.walked < self.pause_at:
            step = min(step, self.pause_at - self.walked)
        self.walked += step
        self.state.speed = self.walk_speed
        if self.pause_at is not None and self.walked >= self.pause_at and self.paused < self.pause_s:
            self.state.speed = 0.0
        p = self.start + (self.end - self.start) * min(self.walked / self.total, 1.0)
        self.state.pose = Pose2D(float(p[0]), float(p[1]), self.heading)
        if self.walked >= self.total:
            self.done = True
            self.active = False


# ------------------------------------------------------------------ ledger

@dataclass
class InfractionLedger:
    route_id: str = ""
    counts: dict = field(default_factory=lambda: {k: 0 for k in INFRACTION_TYPES})
    distance_traveled: float = 0.0  # km
    route_fraction_completed: float = 0.0
    route_length: float = 0.0  # km
    status: str = "running"
    aborted: bool = False
    note: str = ""
    events: list = field(default_factory=list)

    def add(self, kind: str, frame: int, time: float, detail: str = "") -> None:
        self.counts[kind] += 1
        self.events.append({"type": kind, "frame": frame, "time": round(time, 6), "detail": detail})

    def to_dict(self) -> dict:
        return {
            "route_id": self.route_id,
            "counts": dict(self.counts),
            "distance_traveled_km": self.distance_traveled,
            "route_fraction_completed": self.route_fraction_completed,
            "route_length_km": self.route_length,
            "status": self.status,
            "aborted": self.aborted,
            "note": self.note,
            "events": list(self.events),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InfractionLedger":
        counts = {k: int(d.get("counts", {}).get(k, 0)) for k in INFRACTION_TYPES}
        led = cls(
            route_id=str(d.get("route_id", "")),
            counts=counts,
            distance_traveled=float(d["distance_traveled_km"]),
            route_fraction_completed=float(d["route_fraction_completed"]),
            route_length=float(d.get("route_length_km", 0.0)),
            status=str(d.get("status", "completed")),
            aborted=bool(d.get("aborted", False)),
            note=str(d.get("note", "")),
            events=list(d.get("events", [])),
        )
        led.validate()
        return led

    def validate(self) -> None:
        if any(v < 0 for v in self.counts.values()):
            raise ValueError("infraction counts must be non-negative")
        if not 0.0 <= self.route_fraction_completed <= 1.0:
            raise ValueError("route_fraction_completed must lie in [0, 1]")
        if self.distance_traveled < 0:
            raise ValueError("distance_traveled must be non-negative")


# ------------------------------------------------------------------- world

class World:
    def __init__(self, route_id: str, path: Polyline, ego: VehicleState, actors=(),
                 lights=(), stop_signs=(), speed_limit: float = 20.0, hazards=(),
                 dt: float = DT, vehicle: VehicleParams = CAR, shift_segments=()):
        self.route_id = route_id
        self.path = path
        self.route = PathCache(path)
        self.shift_segments = tuple(shift_segments)
        self.ego = ego
        self.actors: list[Actor] = list(actors)
        self.lights: list[TrafficLight] = list(lights)
        self.stop_signs: list[StopSign] = list(stop_signs)
        self.speed_limit = float(speed_limit)
        self.hazards = sorted((float(s), k) for s, k in hazards)
        self._next_hazard = 0
        self.dt = float(dt)
        self.vehicle = vehicle
        self.time = 0.0
        self.frame = 0
        self.contacts: set = set()
        self.ledger = InfractionLedger(route_id=route_id, route_length=path.length / 1000.0)
        self.furthest_arc = 0.0
        self.odometer = 0.0  # m
        s, _, _ = self.route.project(ego.pose.x, ego.pose.y)
        self.ego_arc = self.ego_arc_before = s
        self.furthest_arc = s
        self.ledger.route_fraction_completed = min(s / path.length, 1.0)

    def active_actors(self) -> list[Actor]:
        return [a for a in self.actors if a.active]

    @property
    def route_length(self) -> float:
        return self.path.length

    @property
    def completed(self) -> bool:
        return self.furthest_arc >= self.path.length - 1e-6


def step_world(world: World, ego_control, dt: float | None = None) -> World:
    """Advance the world one tick in place and return it.

    ``ego_control`` is ``(steer, throttle, brake)``.
    """
    dt = world.dt if dt is None else float(dt)
    if dt <= 0:
        raise ValueError("dt must be positive")
    ego = world.ego
    veh = world.vehicle
    ego_xy = (ego.pose.x, ego.pose.y)
    for light in world.lights:
        light.advance(dt, ego_xy)
    for actor in world.actors:
        actor.update(world, dt)

    steer, throttle, brake = (float(c) for c in ego_control)
    steer = min(max(steer, -veh.max_steer), veh.max_steer)
    throttle = min(max(throttle, 0.0), 1.0)
    brake = min(max(brake, 0.0), 1.0)
    a = kernels.vehicle_accel(ego.speed, throttle, brake, veh.a_throttle, veh.a_brake, veh.drag)
    axle0 = ego.front_axle(veh.lf)
    x, y, yaw, v = kernels.bicycle_step(ego.pose.x, ego.pose.y, ego.pose.yaw, ego.speed,
                                        steer, a, dt, veh.lf, veh.lr)
    world.odometer += math.hypot(x - ego.pose.x, y - ego.pose.y)
    ego.pose = Pose2D(float(x), float(y), float(yaw))
    ego.speed = float(v)
    ego.steering = steer
    ego.acceleration_command = float(a)
    world.time += dt
    world.frame += 1
    _detect(world, axle0, ego.front_axle(veh.lf))
    return world


def _detect(world: World, axle0, axle1) -> None:
    ego = world.ego
    led = world.ledger
    f, t = world.frame, world.time
    active = world.active_actors()
    now = set()
    if active:
        boxes = np.array([a.state.box_array() for a in active])
        ego_rows = np.repeat(ego.box_array()[None, :], len(active), axis=0)
        hit = kernels.obb_overlap_pairs(ego_rows, boxes)
        for a, h in zip(active, hit):
            if not h:
                continue
            now.add(a.actor_id)
            if a.actor_id in world.contacts:
                continue
            kind = a.state.kind
            code = "CP" if kind == "pedestrian" else "CL" if kind == "static_obstacle" else "CV"
            led.add(code, f, t, a.actor_id)
    world.contacts = now

    for light in world.lights:
        if light.phase == "red" and light.stop_line.crossed_by(axle0, axle1):
            led.add("RL", f, t, light.light_id)

    bumper = ego.pose.to_world(0.5 * ego.extent[0], 0.0)
    for sign in world.stop_signs:
        a, b = sign.stop_line.a, sign.stop_line.b
        if _point_segment_distance(bumper, a, b) <= STOP_SIGN_RANGE and ego.speed < STOP_SPEED:
            sign.served = True
        if sign.stop_line.crossed_by(axle0, axle1):
            if not sign.served:
                led.add("SI", f, t, sign.sign_id)
            sign.served = False

    s, _, _ = world.route.project(ego.pose.x, ego.pose.y)
    world.ego_arc = s
    if s > world.furthest_arc:
        world.furthest_arc = s
    while world._next_hazard < len(world.hazards) and \
            world.hazards[world._next_hazard][0] <= world.furthest_arc:
        led.add(world.hazards[world._next_hazard][1], f, t, "hazard")
        world._next_hazard += 1
    led.route_fraction_completed = min(world.furthest_arc / world.path.length, 1.0)
    led.distance_traveled = world.odometer / 1000.0


def _point_segment_distance(p, a, b) -> float:
    ax, ay = a
    sx, sy = b[0] - ax, b[1] - ay
    l2 = sx * sx + sy * sy
    t = 0.0 if l2 == 0 else max(0.0, min(1.0, ((p[0] - ax) * sx + (p[1] - ay) * sy) / l2))
    return math.hypot(p[0] - ax - t * sx, p[1] - ay - t * sy)
