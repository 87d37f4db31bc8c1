import math

import numpy as np
import pytest

from drivebench.dataset import DataError
from drivebench.expert import ExpertDriver
from drivebench.geometry import Polyline, Pose2D, Segment, obb_intersects, resample_equidistant
from drivebench.vehicle import VehicleParams
from drivebench.worldsim import (ConstantDriver, EarlyTerminationDriver, InfractionLedger, Limits,
                                 RouteSpec, ScenarioSpec, StopSign, TrafficLight, World,
                                 build_world, run_route, run_world, step_world)
from drivebench.worldsim.suite import bundled_suite_path, load_suite, parse_suite
from drivebench.worldsim.world import StaticObstacle, VehicleState, Walker

NO_DRAG = VehicleParams(drag=0.0)


def line_world(length=200.0, speed=0.0, vehicle=NO_DRAG, **kw):
    path = resample_equidistant(Polyline([(0, 0), (length, 0)]), 1.0)
    return World("line", path, VehicleState(Pose2D(0, 0, 0), speed=speed), vehicle=vehicle, **kw)


def obstacle(x, y=0.0, i="cone"):
    return StaticObstacle(VehicleState(Pose2D(x, y), extent=(1.0, 1.0), kind="static_obstacle", actor_id=i))


def test_vehicle_state_invariants():
    with pytest.raises(ValueError):
        VehicleState(Pose2D(0, 0), speed=-1.0)
    with pytest.raises(ValueError):
        VehicleState(Pose2D(0, 0), kind="bicycle")
    with pytest.raises(ValueError):
        VehicleState(Pose2D(0, 0), extent=(0.0, 1.0))


def test_empty_world_zero_controls():
    w = line_world()
    before = w.ledger.to_dict()
    for _ in range(100):
        step_world(w, (0.0, 0.0, 0.0))
    assert (w.ego.pose.x, w.ego.pose.y, w.ego.speed) == (0.0, 0.0, 0.0)
    after = w.ledger.to_dict()
    assert after["counts"] == before["counts"] and after["events"] == []


def test_step_rejects_bad_dt():
    with pytest.raises(ValueError):
        step_world(line_world(), (0, 0, 0), dt=0.0)


def test_static_obstacle_single_count():
    # creeping through the box keeps it overlapping for many frames
    w = line_world(speed=0.5, actors=[obstacle(8.0)])
    overlapping = 0
    for _ in range(600):
        step_world(w, (0.0, 0.0, 0.0))
        overlapping += "cone" in w.contacts
    assert overlapping > 50
    assert w.ledger.counts["CL"] == 1


def test_contact_episodes_counted_separately():
    w = line_world(speed=3.0, actors=[obstacle(5.0)])
    for _ in range(20):
        step_world(w, (0.0, 0.0, 0.0))
    assert w.ledger.counts["CL"] == 1
    w.ego.pose = Pose2D(-10.0, 0.0, 0.0)
    for _ in range(100):
        step_world(w, (0.0, 0.0, 0.0))
    assert w.ledger.counts["CL"] == 2


def test_collision_counts_coincide_with_overlap():
    walker = Walker(VehicleState(Pose2D(0, 0), extent=(0.6, 0.6), kind="pedestrian", actor_id="ped"),
                    start=(25.0, -4.0), end=(25.0, 4.0), speed=1.4, trigger_point=(25.0, 0.0),
                    trigger_radius=25.0)
    w = line_world(speed=8.0, actors=[walker, obstacle(60.0, 0.3, "rock")])
    seen = 0
    for _ in range(300):
        n = len(w.ledger.events)
        step_world(w, (0.0, 0.3, 0.0))
        for ev in w.ledger.events[n:]:
            other = next(a for a in w.actors if a.actor_id == ev["detail"])
            assert obb_intersects(w.ego.box(), other.state.box())
            seen += 1
    assert w.ledger.counts["CP"] == 1 and w.ledger.counts["CL"] == 1 and seen == 2


def test_red_light_counted_at_known_step():
    light = TrafficLight(Segment((20.0, -2.0), (20.0, 2.0)), [("red", 100.0)])
    w = line_world(speed=5.0, lights=[light])
    # front axle at 1.45 m moving 0.25 m per step reaches 20 m on step 75
    for _ in range(120):
        step_world(w, (0.0, 0.0, 0.0))
    assert w.ledger.counts["RL"] == 1
    assert w.ledger.events[0]["frame"] == 75


def test_green_light_no_infraction():
    light = TrafficLight(Segment((20.0, -2.0), (20.0, 2.0)), [("green", 100.0)])
    w = line_world(speed=5.0, lights=[light])
    for _ in range(120):
        step_world(w, (0.0, 0.0, 0.0))
    assert w.ledger.counts["RL"] == 0


def test_traffic_light_schedule():
    with pytest.raises(ValueError):
        TrafficLight(Segment((0, 0), (0, 1)), [("red", 0.0)])
    with pytest.raises(ValueError):
        TrafficLight(Segment((0, 0), (0, 1)), [("amber", 1.0)])
    tl = TrafficLight(Segment((0, 0), (0, 1)), [("red", 1.0), ("green", 2.0)])
    seq = []
    for _ in range(80):
        tl.advance(0.05, (0, 0))
        seq.append(tl.phase)
    assert seq[18] == "red" and seq[19] == "green" and seq[58] == "green" and seq[59] == "red"
    held = TrafficLight(Segment((0, 0), (0, 1)), [("red", 1.0), ("green", 1.0)], trigger_radius=10.0)
    held.advance(5.0, (50, 0))
    assert held.phase == "red" and not held.started


def test_stop_sign_rolling_vs_full_stop():
    sign = StopSign(Segment((30.0, -2.0), (30.0, 2.0)))
    w = line_world(speed=6.0, stop_signs=[sign])
    for _ in range(200):
        step_world(w, (0.0, 0.0, 0.0))
    assert w.ledger.counts["SI"] == 1
    sign = StopSign(Segment((30.0, -2.0), (30.0, 2.0)))
    route = RouteSpec("stop", geometry=[("line", 80.0)], speed_limit=10.0,
                      scenarios=[ScenarioSpec("PlainRoute", 40.0, {"stop_sign": True})])
    led, _ = run_route(route, log_every=0)
    assert led.counts["SI"] == 0 and led.status == "completed"


def test_full_brake_driver_times_out():
    route = RouteSpec("brake", geometry=[("line", 500.0)])
    led, frames = run_route(route, driver=ConstantDriver(brake=1.0), log_every=50)
    assert led.counts["ST"] >= 1 and led.status == "blocked"
    assert led.route_fraction_completed == pytest.approx(0.0, abs=1e-9)
    assert frames[-1].sim_time < 90.0 + 1e-9


def test_route_timeout():
    route = RouteSpec("slow", geometry=[("line", 500.0)])
    led, _ = run_route(route, driver=ConstantDriver(throttle=0.01), limits=Limits(timeout=20.0), log_every=0)
    assert led.status == "timeout" and led.counts["ST"] == 1
    assert Limits().route_timeout(500.0) == pytest.approx(300.0)


class _Broken:
    def reset(self, world):
        self.n = 0

    def act(self, world):
        self.n += 1
        if self.n > 10:
            raise RuntimeError("sensor dropout")
        return (0.0, 0.5, 0.0)


def test_driver_failure_aborts_with_partial_ledger():
    led, frames = run_route(RouteSpec("x", geometry=[("line", 100.0)]), driver=_Broken())
    assert led.aborted and led.status == "aborted"
    assert "sensor dropout" in led.note
    assert len(frames) == 10 and led.distance_traveled > 0


def test_expert_clears_empty_straight_route():
    led, _ = run_route(RouteSpec("s", geometry=[("line", 500.0)]), log_every=0)
    assert led.status == "completed"
    assert led.route_fraction_completed == 1.0
    assert sum(led.counts.values()) == 0


def test_determinism_bit_identical():
    route = [r for r in load_suite(bundled_suite_path("bundled"))
             if r.route_id == "construction_obstacle_two_ways"][0]
    a = run_route(route, seed=5, log_every=4)
    b = run_route(route, seed=5, log_every=4)
    assert a[0].to_dict() == b[0].to_dict()
    assert [f.to_dict() for f in a[1]] == [f.to_dict() for f in b[1]]


def test_route_fraction_non_decreasing():
    route = [r for r in load_suite(bundled_suite_path("bundled")) if r.route_id == "plain_route"][0]
    w = build_world(route, seed=0)
    drv = ExpertDriver()
    drv.reset(w)
    last = 0.0
    while not w.completed and w.time < 120:
        step_world(w, drv.act(w))
        assert w.ledger.route_fraction_completed >= last
        last = w.ledger.route_fraction_completed
    assert last == 1.0


def test_dt_halving_moves_final_position_little():
    def cruise(dt):
        w = line_world(length=700.0, vehicle=VehicleParams(), dt=dt)
        w.ego.speed = 10.0
        while w.time < 22.0 - 1e-9:
            step_world(w, (0.0, 0.25, 0.0))
        return w.ego.pose.x

    a, b = cruise(0.05), cruise(0.025)
    assert 480.0 < a < 520.0
    assert abs(a - b) < 0.1


def test_early_termination_rc_near_fifteen_percent():
    route = RouteSpec("long", geometry=[("line", 10_000.0)])
    led, _ = run_route(route, driver=EarlyTerminationDriver(ExpertDriver(), 1.5), log_every=0)
    assert led.status == "terminated"
    assert led.route_fraction_completed == pytest.approx(0.15, abs=0.01)
    assert led.counts["ST"] == 0


def test_hazards_counted_as_route_progresses():
    route = RouteSpec("haz", geometry=[("line", 2000.0)], hazards={"RL": 3.0})
    w = build_world(route, seed=2)
    led, _ = run_route(route, seed=2, log_every=0)
    assert led.counts["RL"] == len(w.hazards) > 0


# ------------------------------------------------------------------ ledger

def test_ledger_round_trip_and_validation():
    led, _ = run_route(RouteSpec("s", geometry=[("line", 100.0)]), log_every=0)
    back = InfractionLedger.from_dict(led.to_dict())
    assert back.to_dict() == led.to_dict()
    bad = led.to_dict()
    bad["route_fraction_completed"] = 1.5
    with pytest.raises(ValueError):
        InfractionLedger.from_dict(bad)
    bad = led.to_dict()
    bad["counts"]["CP"] = -1
    with pytest.raises(ValueError):
        InfractionLedger.from_dict(bad)


# ------------------------------------------------------------------- suites

def test_bundled_suites_load():
    routes = load_suite(bundled_suite_path("bundled"))
    kinds = {s.kind for r in routes for s in r.scenarios}
    assert len(routes) == 6 and len(kinds) == 6
    for r in load_suite(bundled_suite_path("hazard")):
        assert r.dense_path().length == pytest.approx(10_000.0, abs=0.5)
        assert r.hazards


def test_empty_suite():
    assert parse_suite("version = 1\n") == []


SUITE = """version = 1

[[route]]
id = "a"
geometry = [["line", 100]]

[[route]]
id = "b"
geometry = [["line", 50]]
speed_limit = 35.0
"""


def test_suite_semantic_error_names_line():
    with pytest.raises(DataError, match=r"s\.toml:7: .*speed_limit"):
        parse_suite(SUITE, "s.toml")


def test_suite_syntax_error_names_line():
    with pytest.raises(DataError, match=r"s\.toml:3:"):
        parse_suite('version = 1\n[[route]]\nid = "a\n', "s.toml")


@pytest.mark.parametrize("text,msg", [
    ('version = 2\n', "version"),
    ('[[route]]\nid = "a"\ngeometry = [["line", 10]]\ncolour = 1\n', "unknown route keys"),
    ('[[route]]\ngeometry = [["line", 10]]\n', "missing key"),
    ('[[route]]\nid = "a"\ngeometry = [["line", 10]]\n[[route]]\nid = "a"\ngeometry = [["line", 10]]\n',
     "duplicate"),
    ('[[route]]\nid = "a"\ngeometry = [["line", 50]]\n[[route.scenario]]\nkind = "Teleport"\ntrigger_arc = 1\n',
     "unknown scenario kind"),
    ('[[route]]\nid = "a"\n', "exactly one of"),
])
def test_suite_errors(text, msg):
    with pytest.raises(DataError, match=msg):
        parse_suite(text, "s.toml")


def test_trigger_beyond_route_rejected():
    from drivebench.route import RouteError
    route = RouteSpec("t", geometry=[("line", 50.0)], scenarios=[ScenarioSpec("PlainRoute", 80.0)])
    with pytest.raises(RouteError, match="beyond route length"):
        build_world(route)


def test_target_point_routes():
    route = RouteSpec("tp", target_points=[(0, 0), (100, 0), (100, 60)], speed_limit=12.0)
    led, _ = run_route(route, log_every=0)
    assert led.status == "completed" and sum(led.counts.values()) == 0
