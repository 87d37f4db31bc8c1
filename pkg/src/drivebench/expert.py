"""The privileged rule-based expert: planner plus controllers bound to a world."""
from __future__ import annotations

import math
from dataclasses import dataclass


from .control import (Checkpoints, LateralPID, LonModel, default_lon_model, longitudinal_control,
                      select_checkpoint)
from .geometry import project_onto
from .planner import (PathCache, PlanResult, StylePreset, curvature_speed_cap, get_preset,
                      plan_detailed)
from .vehicle import CAR, VehicleParams

CONFLICT_HEADING = math.radians(45.0)  # lanes meeting at a shallower angle are followed, not gated
CONFLICT_MARGIN = 0.5
GAP_BUFFER = 2.5  # s of clearance required ahead of crossing traffic
HARD_DECEL = 6.0
STOP_HOLD = 0.5  # s at standstill before a stop sign is released


@dataclass
class ConflictZone:
    """Stretch of the ego path shared with another lane crossing or opposing it."""

    ego_lo: float
    ego_hi: float
    lane_lo: float
    lane_hi: float


def conflict_zone(ego_cache: PathCache, lane, half_width: float) -> ConflictZone | None:
    pts = ego_cache.path.points
    cum = ego_cache.cum
    lane_h = None
    ego_hit, lane_hit = [], []
    for i in range(0, len(pts) - 1):
        s_lane, lat = project_onto(lane, pts[i])
        if abs(lat) >= half_width or s_lane <= 0.0 or s_lane >= lane.length:
            continue
        ego_h = math.atan2(pts[i + 1][1] - pts[i][1], pts[i + 1][0] - pts[i][0])
        lane_h = lane.heading_at(s_lane)
        d = abs((ego_h - lane_h + math.pi) % (2 * math.pi) - math.pi)
        if d < CONFLICT_HEADING:
            continue
        ego_hit.append(cum[i])
        lane_hit.append(s_lane)
    if not ego_hit:
        return None
    return ConflictZone(min(ego_hit), max(ego_hit), min(lane_hit), max(lane_hit))


def time_to_cover(distance: float, v: float, a: float, v_max: float) -> float:
    if distance <= 0:
        return 0.0
    v = min(v, v_max)
    t1 = (v_max - v) / a
    d1 = (v_max * v_max - v * v) / (2 * a)
    if distance <= d1:
        return (-v + math.sqrt(v * v + 2 * a * distance)) / a
    return t1 + (distance - d1) / v_max


class ExpertDriver:
    """Observes a world with privileged access and returns (steer, throttle, brake)."""

    def __init__(self, preset: StylePreset | str = "adjusted", vehicle: VehicleParams = CAR,
                 lon: LonModel | None = None, pid: LateralPID | None = None):
        self.preset = get_preset(preset) if isinstance(preset, str) else preset
        self.vehicle = vehicle
        self.lon = lon or default_lon_model()
        self._pid_template = pid or LateralPID(max_steer=vehicle.max_steer)
        self.max_target: float | None = None
        self.last_target = 0.0
        self.last_plan: PlanResult | None = None
        self.last_checkpoints: Checkpoints | None = None

    def reset(self, world) -> None:
        t = self._pid_template
        self.pid = LateralPID(t.kp, t.ki, t.kd, t.max_steer)
        self.path = PathCache(world.path)
        self.max_target = None
        self.last_target = 0.0
        self._light_arcs = [self._line_arc(l.stop_line) for l in world.lights]
        self._sign_arcs = [self._line_arc(s.stop_line) for s in world.stop_signs]
        self._sign_done = [False] * len(world.stop_signs)
        self._sign_wait = [0.0] * len(world.stop_signs)
        self._zones = {}
        hw = 0.5 * world.ego.extent[1]
        for a in world.actors:
            lane = getattr(a, "lane", None)
            if lane is None:
                continue
            key = id(lane.path)
            if key not in self._zones:
                self._zones[key] = conflict_zone(self.path, lane.path,
                                                 hw + 0.5 * a.state.extent[1] + CONFLICT_MARGIN)

    def _line_arc(self, seg) -> float:
        mid = (0.5 * (seg.a[0] + seg.b[0]), 0.5 * (seg.a[1] + seg.b[1]))
        return project_onto(self.path.path, mid)[0]

    # ------------------------------------------------------------ gaps
    def _stop_gaps(self, world, s_ego: float) -> list:
        ego = world.ego
        hl = 0.5 * ego.extent[0]
        front = s_ego + hl
        axle = s_ego + self.vehicle.lf
        gaps = []
        for light, arc in zip(world.lights, self._light_arcs):
            if light.phase == "red" and arc > axle:
                gaps.append(arc - front)
        for i, (sign, arc) in enumerate(zip(world.stop_signs, self._sign_arcs)):
            if self._sign_done[i] or arc <= axle:
                continue
            if arc - front <= 3.0 and ego.speed < 0.1:
                self._sign_wait[i] += world.dt
                if self._sign_wait[i] >= STOP_HOLD:
                    self._sign_done[i] = True
                    continue
            gaps.append(arc - front)
        gaps.extend(self._yield_gaps(world, s_ego))
        return gaps

    def _yield_gaps(self, world, s_ego: float) -> list:
        ego = world.ego
        p = self.preset.idm
        front = s_ego + 0.5 * ego.extent[0]
        rear = s_ego - 0.5 * ego.extent[0]
        gaps = []
        for a in world.actors:
            if not a.active or getattr(a, "lane", None) is None:
                continue
            z = self._zones.get(id(a.lane.path))
            if z is None or front >= z.ego_lo or rear > z.ego_hi:
                continue
            a_hl = 0.5 * a.state.extent[0]
            if a.arc - a_hl > z.lane_hi:
                continue
            t_arrive = max(0.0, z.lane_lo - (a.arc + a_hl)) / max(a.state.speed, 0.5)
            dist = z.ego_hi - front + ego.extent[0]
            t_clear = time_to_cover(dist, ego.speed, p.a_max, max(world.speed_limit, 1.0))
            if t_arrive >= t_clear + GAP_BUFFER:
                continue
            room = z.ego_lo - front
            if room < ego.speed ** 2 / (2.0 * HARD_DECEL):
                continue  # too late to stop short of the zone: commit
            gaps.append(room)
        return gaps

    # ------------------------------------------------------------- act
    def act(self, world):
        ego = world.ego
        pc = self.path
        s_ego, _, _ = pc.project(ego.pose.x, ego.pose.y)
        v0 = min(world.speed_limit, curvature_speed_cap(pc, s_ego, self.preset.idm.b_comf))
        actors = [a.state for a in world.active_actors()]
        res = plan_detailed(ego, actors, pc, self.preset, v0=v0,
                            stop_gaps=self._stop_gaps(world, s_ego), dt=world.dt,
                            pid=self.pid, lon=self.lon, vehicle=self.vehicle)
        target = res.target_speed
        if self.max_target is not None:
            target = min(target, self.max_target)
        cps = Checkpoints.from_path(pc.xs, pc.ys, pc.cum, s_ego, ego.pose.x, ego.pose.y, ego.pose.yaw)
        steer = self.pid.step(select_checkpoint(cps, ego.speed * 3.6), world.dt)
        throttle, brake = longitudinal_control(ego.speed, target, self.lon)
        self.last_target = target
        self.last_plan = res
        self.last_checkpoints = cps
        return steer, throttle, brake
