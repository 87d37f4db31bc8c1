import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from shapely.geometry import LineString

from drivebench.geometry import Pose2D
from drivebench.planner import (PRESETS, IdmParams, PathCache, forecast_agents, get_preset,
                                idm_acceleration, idm_target_speed, plan, plan_detailed,
                                preset_from_mapping, rollout_ego, select_leader)
from drivebench.route import SparseRoute, densify
from drivebench.vehicle import CAR
from drivebench.worldsim.world import VehicleState
from oracles import brute_force_rejection, polygon

DEFAULT = get_preset("default")
ADJUSTED = get_preset("adjusted")


def straight_path(length=150.0):
    return PathCache(densify(SparseRoute([(0, 0), (length, 0)])).polyline)


def curved_path():
    pts = [(0, 0), (20, 0)]
    pts += [(20 + 30 * math.sin(a), 30 * (1 - math.cos(a))) for a in np.linspace(0.01, math.pi / 2, 120)]
    pts += [(50, 60)]
    return PathCache(densify(SparseRoute(pts)).polyline)


def ego(speed=8.0, x=0.0, y=0.0, yaw=0.0):
    return VehicleState(Pose2D(x, y, yaw), speed=speed)


def ped(x, y, heading, speed=1.4, i=0):
    return VehicleState(Pose2D(x, y, heading), speed=speed, extent=(0.6, 0.6), kind="pedestrian",
                        actor_id=f"p{i}")


def car(x, y, yaw=0.0, speed=0.0, steer=0.0, i=0):
    return VehicleState(Pose2D(x, y, yaw), speed=speed, steering=steer, kind="background_vehicle",
                        actor_id=f"v{i}")


# ------------------------------------------------------------------ params

def test_presets_are_valid_and_distinct():
    assert set(PRESETS) == {"default", "adjusted"}
    d, a = DEFAULT.idm, ADJUSTED.idm
    assert (d.T, d.s0, d.b_comf) == (1.5, 4.0, 2.0)
    assert (a.T, a.s0, a.b_comf, a.stop_margin_pedestrian) == (1.0, 2.0, 3.5, 4.0)
    with pytest.raises(ValueError):
        get_preset("sporty")


@pytest.mark.parametrize("bad", [{"T": 0.0}, {"s0": -1.0}, {"delta": 0.5}, {"v0_max": 25.0}])
def test_idm_params_invariants(bad):
    with pytest.raises(ValueError):
        IdmParams(**bad)


def test_preset_from_mapping():
    p = preset_from_mapping("mine", {"T": 2.0}, base="adjusted")
    assert p.idm.T == 2.0 and p.idm.s0 == 2.0


# --------------------------------------------------------------------- IDM

def idm_reference(v, gap, lead, v0, T, s0, a, b, delta, dt):
    """Direct transcription of the IDM step, written independently."""
    if gap == math.inf:
        acc = a * (1 - (v / v0) ** delta)
    else:
        s_star = s0 + max(0.0, v * T + v * (v - lead) / (2 * math.sqrt(a * b)))
        acc = a * (1 - (v / v0) ** delta - (s_star / gap) ** 2)
    return min(max(v + acc * dt, 0.0), v0), acc


def test_idm_equilibrium_and_standstill():
    p = DEFAULT.idm
    assert idm_target_speed(20.0, math.inf, 0.0, p) == 20.0
    assert idm_target_speed(0.0, math.inf, 0.0, p) == pytest.approx(p.a_max * 0.05)
    assert idm_acceleration(0.0, math.inf, 0.0, p) == p.a_max


def test_idm_leader_case_against_reference():
    p = DEFAULT.idm
    expect, acc = idm_reference(10.0, 20.0, 5.0, 20.0, 1.5, 4.0, 2.5, 2.0, 4.0, 0.05)
    assert idm_acceleration(10.0, 20.0, 5.0, p) == pytest.approx(acc, abs=1e-12)
    assert idm_target_speed(10.0, 20.0, 5.0, p) == pytest.approx(expect, abs=1e-12)
    assert expect == pytest.approx(9.8325, abs=1e-4)


def test_idm_non_positive_gap_is_emergency():
    assert idm_target_speed(10.0, 0.0, 0.0, DEFAULT.idm) == 0.0
    assert idm_target_speed(10.0, -3.0, 0.0, DEFAULT.idm) == 0.0


@given(st.floats(0, 20), st.floats(0.5, 200), st.floats(0, 20), st.sampled_from(["default", "adjusted"]))
def test_idm_matches_reference(v, gap, lead, name):
    p = get_preset(name).idm
    expect, acc = idm_reference(v, gap, lead, p.v0_max, p.T, p.s0, p.a_max, p.b_comf, p.delta, 0.05)
    assert idm_acceleration(v, gap, lead, p) == pytest.approx(acc, abs=1e-12, rel=1e-12)
    got = idm_target_speed(v, gap, lead, p)
    if acc >= -p.b_emergency:
        assert got == pytest.approx(expect, abs=1e-12)
    else:
        assert got == pytest.approx(min(max(v - p.b_emergency * 0.05, 0.0), p.v0_max), abs=1e-12)
    assert 0.0 <= got <= p.v0_max


# ---------------------------------------------------------------- forecast

def test_forecast_stationary():
    fc = forecast_agents([car(10, 0)], 2.0, 0.05)
    assert fc.boxes.shape == (1, 41, 5)
    assert np.all(fc.boxes[0] == fc.boxes[0, 0])


def test_forecast_constant_velocity():
    fc = forecast_agents([car(0, 0, speed=10.0)], 2.0, 0.05)
    assert np.allclose(np.diff(fc.boxes[0, :, 0]), 0.5)
    assert fc.boxes[0, -1, 0] == pytest.approx(20.0)


def test_forecast_first_box_is_footprint():
    a = car(3, 4, yaw=0.4, speed=5)
    fc = forecast_agents([a], 2.0, 0.05)
    assert np.allclose(fc.boxes[0, 0], a.box_array())


def test_forecast_constant_steer_follows_analytic_arc():
    v, steer = 5.0, 0.1
    fc = forecast_agents([car(0, 0, speed=v, steer=steer)], 2.0, 0.05)
    beta = math.atan(CAR.lr / (CAR.lf + CAR.lr) * math.tan(steer))
    R = CAR.lr / math.sin(beta)
    psi0 = beta
    xc, yc = -R * math.sin(psi0), R * math.cos(psi0)
    t = np.arange(41) * 0.05
    psi = psi0 + v * t / R
    assert np.allclose(fc.boxes[0, :, 0], xc + R * np.sin(psi), atol=1e-3)
    assert np.allclose(fc.boxes[0, :, 1], yc - R * np.cos(psi), atol=1e-3)


def test_forecast_pedestrian_walks_straight():
    fc = forecast_agents([ped(0, 0, math.pi / 2, 1.4)], 2.0, 0.05)
    assert fc.boxes[0, -1, 1] == pytest.approx(2.8)
    assert np.allclose(fc.boxes[0, :, 0], 0.0)


# ------------------------------------------------------------------ leader

def corridor_oracle(e, actors, pc, margin=0.5, lookahead=64.0):
    """Nearest actor by arc whose forecast touches the buffered path ahead."""
    fc = forecast_agents(actors, 2.0, 0.05)
    pts = pc.path.points[(pc.cum >= 0) & (pc.cum <= lookahead)]
    corridor = LineString(pts).buffer(0.5 * e.extent[1] + margin, cap_style=2)
    best, best_arc = None, math.inf
    for i, a in enumerate(actors):
        for b in fc.boxes[i]:
            poly = polygon(b)
            if poly.intersects(corridor):
                arc = LineString(pts).project(poly.intersection(corridor).centroid)
                if arc < best_arc:
                    best, best_arc = a.actor_id, arc
                break
    return best


def test_select_leader_cases():
    pc = straight_path()
    e = ego()
    assert select_leader(e, forecast_agents([], 2.0, 0.05), pc) is None
    fc = forecast_agents([car(30, 0, i=1)], 2.0, 0.05)
    assert select_leader(e, fc, pc) == "v1"
    actors = [car(40, 0, i=2), car(20, 0, i=1)]
    fc = forecast_agents(actors, 2.0, 0.05)
    assert select_leader(e, fc, pc) == "v1" == corridor_oracle(e, actors, pc)


def test_select_leader_ignores_adjacent_lane():
    pc = straight_path()
    fc = forecast_agents([car(20, 3.5, i=1)], 2.0, 0.05)
    assert select_leader(ego(), fc, pc) is None


# ----------------------------------------------------------------- rollout

def test_rollout_stopped_stays_put():
    boxes = rollout_ego(ego(0.0), straight_path(), 0.0)
    assert np.allclose(boxes, boxes[0])


def test_rollout_straight_at_current_speed():
    boxes = rollout_ego(ego(8.0), straight_path(), 8.0)
    steps = np.diff(boxes[:, 0])
    assert np.all(np.abs(steps - 8.0 * 0.05) <= 0.05 * 8.0 * 0.05)


def test_rollout_curve_heading_tracks_tangent():
    pc = curved_path()
    s0 = 25.0
    x, y, h = pc.path.point_at(s0)
    boxes = rollout_ego(ego(10.0, x, y, h), pc, 10.0)
    fx, fy, fyaw = boxes[-1, :3]
    s, _, _ = pc.project(fx, fy, window=None)
    tangent = pc.path.heading_at(s)
    err = abs((fyaw - tangent + math.pi) % (2 * math.pi) - math.pi)
    assert math.degrees(err) < 5.0


# -------------------------------------------------------------------- plan

def test_plan_empty_road_is_free_proposal():
    res = plan_detailed(ego(8.0), [], straight_path(), DEFAULT)
    assert res.rejected_by is None
    assert res.target_speed == pytest.approx(idm_target_speed(8.0, math.inf, 0.0, DEFAULT.idm))


def test_plan_rejects_crossing_pedestrian():
    pc = straight_path()
    e, p = ego(8.0), ped(10.0, -1.4, math.pi / 2)
    res = plan_detailed(e, [p], pc, DEFAULT)
    assert res.target_speed == 0.0
    assert res.rejected_by == "p0"
    assert brute_force_rejection(e, [p], pc, DEFAULT, 20.0)


def test_plan_pedestrian_already_past():
    pc = straight_path()
    res = plan_detailed(ego(8.0), [ped(10.0, 2.6, math.pi / 2)], pc, DEFAULT)
    assert res.rejected_by is None
    assert res.target_speed > 0


def test_paths_cross_but_never_simultaneously():
    # the car clears the crossing long before the ego gets there
    pc = straight_path()
    e = ego(8.0)
    c = car(14.0, -4.0, yaw=math.pi / 2, speed=15.0)
    res = plan_detailed(e, [c], pc, DEFAULT)
    fc = forecast_agents([c], 2.0, 0.05)
    ego_boxes = rollout_ego(e, pc, res.proposal)
    ego_shapes = [polygon(b) for b in ego_boxes]
    crossing = any(ego_shapes[i].intersects(polygon(fc.boxes[0, j]))
                   for i in range(41) for j in range(41))
    assert crossing  # the swept areas do overlap
    assert res.rejected_by is None and res.target_speed > 0


def test_rejection_matches_brute_force_on_200_scenes():
    rng = np.random.default_rng(11)
    pc = straight_path()
    agree = rejected = 0
    for k in range(200):
        e = ego(float(rng.uniform(0, 15)))
        actors = []
        for i in range(int(rng.integers(1, 4))):
            if rng.random() < 0.5:
                actors.append(ped(float(rng.uniform(3, 30)), float(rng.uniform(-6, 6)),
                                  float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(0, 2.5)), i))
            else:
                actors.append(car(float(rng.uniform(-10, 45)), float(rng.uniform(-8, 8)),
                                  float(rng.uniform(-np.pi, np.pi)), float(rng.uniform(0, 12)),
                                  float(rng.uniform(-0.3, 0.3)), i))
        preset = DEFAULT if k % 2 else ADJUSTED
        got = plan_detailed(e, actors, PathCache(pc.path), preset).rejected_by is not None
        want = brute_force_rejection(e, actors, PathCache(pc.path), preset, preset.idm.v0_max)
        agree += got == want
        rejected += want
    assert 20 <= rejected <= 180  # both outcomes well represented
    assert agree == 200


scene_actor = st.one_of(
    st.builds(ped, st.floats(0, 40), st.floats(-6, 6), st.floats(-math.pi, math.pi), st.floats(0, 2.5)),
    st.builds(car, st.floats(-10, 50), st.floats(-8, 8), st.floats(-math.pi, math.pi), st.floats(0, 15),
              st.floats(-0.3, 0.3)),
)


@given(st.floats(0, 20), st.lists(scene_actor, max_size=3), scene_actor,
       st.sampled_from(["default", "adjusted"]), st.floats(1, 20))
def test_plan_bounded_and_monotone(v, actors, extra, name, v0):
    actors = [VehicleState(a.pose, a.speed, a.steering, 0.0, a.extent, a.kind, f"a{i}")
              for i, a in enumerate(actors)]
    extra = VehicleState(extra.pose, extra.speed, extra.steering, 0.0, extra.extent, extra.kind, "extra")
    pc = straight_path()
    preset = get_preset(name)
    base = plan(ego(v), actors, PathCache(pc.path), preset, v0=v0)
    more = plan(ego(v), actors + [extra], PathCache(pc.path), preset, v0=v0)
    assert 0.0 <= base <= min(v0, preset.idm.v0_max)
    assert more <= base
