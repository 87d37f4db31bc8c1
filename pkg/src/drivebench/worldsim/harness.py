"""Closed-loop route execution and frame logging."""
from __future__ import annotations

from dataclasses import dataclass

from ..control import Checkpoints
from ..dataset import MAX_SPEED, FrameRecord
from ..vehicle import CAR
from .scenarios import RouteSpec, build_world
from .world import DT, STOP_SPEED, World, step_world

BLOCKED_TIMEOUT = 90.0
TIMEOUT_SPEED = 5.0  # m/s reference speed for the route timeout
TIMEOUT_FACTOR = 3.0


@dataclass(frozen=True)
class Limits:
    timeout: float | None = None  # s; None scales with route length
    blocked_timeout: float = BLOCKED_TIMEOUT

    def route_timeout(self, length_m: float) -> float:
        if self.timeout is not None:
            return self.timeout
        return TIMEOUT_FACTOR * length_m / TIMEOUT_SPEED


class ConstantDriver:
    """Applies the same controls every tick."""

    def __init__(self, steer: float = 0.0, throttle: float = 0.0, brake: float = 0.0):
        self.control = (steer, throttle, brake)
        self.last_target = 0.0

    def reset(self, world) -> None:
        pass

    def act(self, world):
        return self.control


class EarlyTerminationDriver:
    """Wraps a driver; past ``cutoff_km`` of odometer the target speed is
    forced to 0 and the run ends once the ego is at rest."""

    def __init__(self, inner, cutoff_km: float):
        self.inner = inner
        self.cutoff_km = float(cutoff_km)
        self.finished = False
        self.stopping = False

    @property
    def last_target(self) -> float:
        return getattr(self.inner, "last_target", 0.0)

    @property
    def last_checkpoints(self):
        return getattr(self.inner, "last_checkpoints", None)

    def reset(self, world) -> None:
        self.inner.reset(world)
        self.finished = False
        self.stopping = False

    def act(self, world):
        from ..metrics import early_termination_policy

        if not self.stopping and early_termination_policy(world.odometer / 1000.0, self.cutoff_km):
            self.stopping = True
        if self.stopping:
            if world.ego.speed < STOP_SPEED:
                self.finished = True
            if hasattr(self.inner, "max_target"):
                self.inner.max_target = 0.0
                return self.inner.act(world)
            return (0.0, 0.0, 1.0)
        return self.inner.act(world)


def _frame(world: World, driver, frame_index: int, sim_time: float, pose, speed, events) -> FrameRecord:
    cps = getattr(driver, "last_checkpoints", None)
    if cps is None:
        pc = world.route
        cps = Checkpoints.from_path(pc.xs, pc.ys, pc.cum, world.ego_arc_before, pose.x, pose.y, pose.yaw)
    target = min(max(float(getattr(driver, "last_target", 0.0)), 0.0), MAX_SPEED)
    return FrameRecord(world.route_id, frame_index, round(sim_time, 9), pose.x, pose.y, pose.yaw,
                       speed, target, cps.points, events)


def run_world(world: World, driver, limits: Limits = Limits(), log_every: int = 1):
    """Drive ``world`` to completion; returns (ledger, frames)."""
    led = world.ledger
    timeout = limits.route_timeout(world.route_length)
    frames = []
    try:
        driver.reset(world)
    except Exception as exc:  # noqa: BLE001 - any driver failure aborts the route
        led.status, led.aborted, led.note = "aborted", True, f"driver reset failed: {exc!r}"
        return led, frames
    blocked = 0.0
    while True:
        pose, speed, t, f = world.ego.pose, world.ego.speed, world.time, world.frame
        world.ego_arc_before = world.ego_arc
        try:
            control = driver.act(world)
        except Exception as exc:  # noqa: BLE001
            led.status, led.aborted, led.note = "aborted", True, f"driver failed at frame {f}: {exc!r}"
            break
        n_events = len(led.events)
        step_world(world, control)
        if log_every and f % log_every == 0:
            frames.append(_frame(world, driver, f, t, pose, speed, led.events[n_events:]))
        if world.completed:
            led.status = "completed"
            break
        if getattr(driver, "finished", False):
            led.status = "terminated"
            break
        blocked = blocked + world.dt if world.ego.speed < STOP_SPEED else 0.0
        if blocked >= limits.blocked_timeout - 1e-9:
            led.add("ST", world.frame, world.time, "blocked")
            led.status = "blocked"
            break
        if world.time >= timeout - 1e-9:
            led.add("ST", world.frame, world.time, "timeout")
            led.status = "timeout"
            break
    return led, frames


def run_route(route: RouteSpec, scenarios=None, driver=None, limits: Limits = Limits(),
              seed: int = 0, dt: float = DT, log_every: int = 1, vehicle=CAR):
    """Build the world for ``route`` and drive it; returns (ledger, frames)."""
    if driver is None:
        from ..expert import ExpertDriver
        driver = ExpertDriver("adjusted", vehicle=vehicle)
    world = build_world(route, seed=seed, dt=dt, vehicle=vehicle, scenarios=scenarios)
    return run_world(world, driver, limits, log_every)
