"""Rule-based expert: forecast actors, IDM target speed against the path
corridor, closed-loop ego rollout, and time-aligned collision rejection."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import NamedTuple

import numpy as np

from . import kernels
from .control import DT, LateralPID, LonModel, default_lon_model
from .geometry import Polyline
from .vehicle import CAR, VehicleParams

HORIZON = 2.0
CORRIDOR_MARGIN = 0.5
LOOKAHEAD = 64.0
STOP_LINE_GAP = 1.0  # IDM minimum gap to a red light or stop sign line
LATERAL_ACCEL = 3.0  # curvature speed cap, m/s^2


@dataclass(frozen=True)
class IdmParams:
    v0_max: float = 20.0
    T: float = 1.5
    s0: float = 4.0
    a_max: float = 2.5
    b_comf: float = 2.0
    delta: float = 4.0
    stop_margin_pedestrian: float = 6.0
    b_emergency: float = 9.0  # floor on the IDM acceleration

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ValueError(f"IdmParams.{f.name} must be strictly positive")
        if self.delta < 1:
            raise ValueError("IdmParams.delta must be >= 1")
        if self.v0_max > 20.0:
            raise ValueError("v0_max is capped at 20 m/s")


@dataclass(frozen=True)
class StylePreset:
    name: str
    idm: IdmParams


PRESETS = {
    "default": StylePreset("default", IdmParams()),
    "adjusted": StylePreset(
        "adjusted", IdmParams(T=1.0, s0=2.0, b_comf=3.5, stop_margin_pedestrian=4.0)
    ),
}


def get_preset(name: str) -> StylePreset:
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown style preset {name!r}; choose from {sorted(PRESETS)}") from None


def preset_from_mapping(name: str, values: dict, base: str = "default") -> StylePreset:
    idm = replace(get_preset(base).idm, **{k: float(v) for k, v in values.items()})
    return StylePreset(name, idm)


# --------------------------------------------------------------------- IDM

def idm_acceleration(v: float, gap: float, leader_speed: float, p: IdmParams,
                     v0: float | None = None, s0: float | None = None) -> float:
    v0 = p.v0_max if v0 is None else v0
    s0 = p.s0 if s0 is None else s0
    free = 1.0 - (v / v0) ** p.delta
    if math.isinf(gap):
        return p.a_max * free
    dv = v - leader_speed
    s_star = s0 + max(0.0, v * p.T + v * dv / (2.0 * math.sqrt(p.a_max * p.b_comf)))
    return p.a_max * (free - (s_star / gap) ** 2)


def idm_target_speed(ego_speed: float, gap: float, leader_speed: float, params: IdmParams,
                     dt: float = DT, v0: float | None = None, s0: float | None = None) -> float:
    """One IDM step: ``clamp(v + a*dt, 0, v0)``; a non-positive gap gives 0."""
    v0 = params.v0_max if v0 is None else min(v0, params.v0_max)
    if gap <= 0.0 or v0 <= 0.0:
        return 0.0
    a = max(idm_acceleration(ego_speed, gap, leader_speed, params, v0, s0), -params.b_emergency)
    return min(max(ego_speed + a * dt, 0.0), v0)


# ---------------------------------------------------------------- forecast

class Forecast(NamedTuple):
    ids: tuple
    boxes: np.ndarray  # (n_actors, steps + 1, 5)
    pedestrian: np.ndarray  # (n_actors,) bool
    speeds: np.ndarray
    dt: float

    @property
    def steps(self) -> int:
        return self.boxes.shape[1] - 1


def actor_rows(actors) -> np.ndarray:
    rows = np.zeros((len(actors), 9))
    for i, a in enumerate(actors):
        rows[i] = (a.pose.x, a.pose.y, a.pose.yaw, a.speed, a.steering,
                   a.acceleration_command, 0.5 * a.extent[0], 0.5 * a.extent[1],
                   1.0 if a.kind == "pedestrian" else 0.0)
    return rows


def forecast_agents(actors, horizon: float = HORIZON, dt: float = DT,
                    vehicle: VehicleParams = CAR) -> Forecast:
    """Roll every actor forward holding its last steer and acceleration."""
    steps = int(round(horizon / dt))
    rows = actor_rows(actors)
    boxes = kernels.forecast_actors(rows, steps, dt, vehicle.lf, vehicle.lr)
    return Forecast(tuple(a.actor_id for a in actors), boxes, rows[:, 8] > 0.5,
                    rows[:, 3].copy(), dt)


# ------------------------------------------------------------------ leader

class LeaderCandidate(NamedTuple):
    actor_id: object
    index: int
    gap: float
    speed: float  # actor velocity projected on the path tangent
    pedestrian: bool


@dataclass
class PathCache:
    """Array views of a path plus a moving projection hint."""

    path: Polyline
    xs: np.ndarray = field(init=False)
    ys: np.ndarray = field(init=False)
    cum: np.ndarray = field(init=False)
    curvature: np.ndarray = field(init=False)
    hint: int = -1  # -1 until the first projection

    def __post_init__(self):
        self.xs = self.path.xs
        self.ys = self.path.ys
        self.cum = np.ascontiguousarray(self.path.cum)
        self.curvature = path_curvature(self.path)

    def project(self, x: float, y: float, window: tuple[int, int] | None = (-5, 25)):
        if window is None or self.hint < 0:
            lo, hi = 0, len(self.xs) - 1
        else:
            lo, hi = self.hint + window[0], self.hint + window[1]
        s, lat, seg = kernels.project_window(self.xs, self.ys, self.cum, x, y, lo, hi)
        if window is not None:  # global queries must not move the tracking hint
            self.hint = int(seg)
        return float(s), float(lat), int(seg)


def path_curvature(path: Polyline) -> np.ndarray:
    pts = path.points
    n = len(pts)
    k = np.zeros(n)
    if n < 3:
        return k
    h = np.arctan2(np.diff(pts[:, 1]), np.diff(pts[:, 0]))
    dh = np.abs((np.diff(h) + np.pi) % (2 * np.pi) - np.pi)
    ds = 0.5 * (path.cum[2:] - path.cum[:-2])
    k[1:-1] = dh / ds
    return k


def as_cache(path) -> PathCache:
    if isinstance(path, PathCache):
        return path
    poly = getattr(path, "polyline", path)
    cache = PathCache(poly)
    return cache


def leader_candidates(ego, forecast: Forecast, path, vehicle: VehicleParams = CAR,
                      lookahead: float = LOOKAHEAD,
                      margin: float = CORRIDOR_MARGIN) -> list[LeaderCandidate]:
    """Actors whose forecast boxes enter the ego corridor within the lookahead,
    sorted by gap."""
    pc = as_cache(path)
    if len(forecast.ids) == 0:
        return []
    s_ego, _, seg = pc.project(ego.pose.x, ego.pose.y)
    arcs, _ = kernels.corridor_hits(forecast.boxes, pc.xs, pc.ys, pc.cum, seg,
                                    s_ego + lookahead, 0.5 * ego.extent[1] + margin)
    front = s_ego + 0.5 * ego.extent[0]
    out = []
    for i in np.flatnonzero(np.isfinite(arcs)):
        _, _, heading = kernels.point_at_arc(pc.xs, pc.ys, pc.cum, arcs[i])
        box = forecast.boxes[i, 0]
        v_along = forecast.speeds[i] * math.cos(box[2] - heading)
        out.append(LeaderCandidate(forecast.ids[i], int(i), float(arcs[i] - front),
                                   float(v_along), bool(forecast.pedestrian[i])))
    out.sort(key=lambda c: (c.gap, c.index))
    return out


def select_leader(ego, forecast: Forecast, path, vehicle: VehicleParams = CAR):
    """Id of the nearest actor (by path arc) entering the corridor, else None."""
    cands = leader_candidates(ego, forecast, path, vehicle)
    return cands[0].actor_id if cands else None


# ----------------------------------------------------------------- rollout

def rollout_ego(ego, path, target_speed: float, horizon: float = HORIZON, dt: float = DT,
                pid: LateralPID | None = None, lon: LonModel | None = None,
                vehicle: VehicleParams = CAR) -> np.ndarray:
    """Footprints of the ego under the controllers it actually runs."""
    pc = as_cache(path)
    pid = pid or LateralPID(max_steer=vehicle.max_steer)
    lon = lon or default_lon_model()
    _, _, seg = pc.project(ego.pose.x, ego.pose.y)
    steps = int(round(horizon / dt))
    return kernels.rollout_ego(
        ego.pose.x, ego.pose.y, ego.pose.yaw, ego.speed, ego.steering,
        pc.xs, pc.ys, pc.cum, seg, float(target_speed), steps, dt,
        vehicle.as_array(), pid.gains, pid.state, lon.coef,
        0.5 * ego.extent[0], 0.5 * ego.extent[1],
    )


# -------------------------------------------------------------------- plan

@dataclass
class PlanResult:
    target_speed: float
    proposal: float
    free_proposal: float
    leader: LeaderCandidate | None
    rejected_by: object = None
    rejection_step: int = -1


def plan_detailed(ego, actors, path, preset: StylePreset, *, v0: float | None = None,
                  stop_gaps=(), dt: float = DT, pid: LateralPID | None = None,
                  lon: LonModel | None = None, vehicle: VehicleParams = CAR,
                  forecast: Forecast | None = None) -> PlanResult:
    """Target speed with per-actor rejection.

    Every actor contributes one term: its IDM proposal when it enters the
    corridor (the free-road value otherwise), or 0 when the ego rollout at that
    proposal meets the actor's forecast at an equal time index. The result is
    the minimum over the free-road value, stop-line proposals and all actor
    terms, so adding an actor can never raise it.
    """
    p = preset.idm
    v0 = p.v0_max if v0 is None else min(v0, p.v0_max)
    pc = as_cache(path)
    fc = forecast if forecast is not None else forecast_agents(actors, HORIZON, dt, vehicle)
    free = idm_target_speed(ego.speed, math.inf, 0.0, p, dt, v0)
    proposal = free
    for g in stop_gaps:
        proposal = min(proposal, idm_target_speed(ego.speed, g, 0.0, p, dt, v0, STOP_LINE_GAP))
    n = len(fc.ids)
    per_actor = np.full(n, free)
    cands = leader_candidates(ego, fc, pc, vehicle) if n else []
    for c in cands:
        s0 = p.stop_margin_pedestrian if c.pedestrian else None
        per_actor[c.index] = idm_target_speed(ego.speed, c.gap, c.speed, p, dt, v0, s0)
    if n:
        proposal = min(proposal, float(per_actor.min()))
    leader = cands[0] if cands else None
    target = proposal
    rejected_by, rejection_step = None, -1
    reach = _reach(ego, free, fc.steps * dt, vehicle)
    near = np.flatnonzero(_min_centre_distance(ego, fc.boxes) <= reach) if n else []
    rollouts = {}
    for i in near:
        v = float(per_actor[i])
        if v not in rollouts:
            rollouts[v] = rollout_ego(ego, pc, v, fc.steps * dt, dt, pid, lon, vehicle)
        hit, step = kernels.first_aligned_hit(rollouts[v], fc.boxes[i:i + 1])
        if hit >= 0:
            target = 0.0
            if rejected_by is None:
                rejected_by, rejection_step = fc.ids[i], int(step)
    return PlanResult(target, proposal, free, leader, rejected_by, rejection_step)


def _reach(ego, v_target: float, horizon: float, vehicle: VehicleParams) -> float:
    """Upper bound on how far any rollout box corner can get from the ego centre."""
    v_max = max(ego.speed, v_target) + vehicle.a_throttle * horizon
    return v_max * horizon + math.hypot(ego.extent[0], ego.extent[1])


def _min_centre_distance(ego, boxes: np.ndarray) -> np.ndarray:
    d = np.hypot(boxes[:, :, 0] - ego.pose.x, boxes[:, :, 1] - ego.pose.y)
    radius = np.hypot(boxes[:, 0, 3], boxes[:, 0, 4])
    return d.min(axis=1) - radius


def plan(ego, actors, path, preset: StylePreset, **kwargs) -> float:
    """Target speed: IDM proposal, or 0 when a rollout meets a forecast box."""
    return plan_detailed(ego, actors, path, preset, **kwargs).target_speed


def curvature_speed_cap(pc: PathCache, s_ego: float, b_comf: float,
                        horizon: float = LOOKAHEAD, a_lat: float = LATERAL_ACCEL) -> float:
    """Braking-envelope speed cap from the path curvature ahead."""
    lo = int(np.searchsorted(pc.cum, s_ego))
    hi = int(np.searchsorted(pc.cum, s_ego + horizon))
    k = pc.curvature[lo:hi + 1]
    if k.size == 0 or not np.any(k > 1e-4):
        return math.inf
    dist = np.maximum(pc.cum[lo:hi + 1] - s_ego, 0.0)
    v_curve = np.sqrt(a_lat / np.maximum(k, 1e-9))
    return float(np.min(np.sqrt(v_curve ** 2 + 2.0 * b_comf * dist)))
