"""Fixed-timestep 2D driving world, scenario library and route harness."""
from .world import (DT, INFRACTION_TYPES, InfractionLedger, StopSign, TrafficLight, VehicleState,
                    World, step_world)
from .scenarios import SCENARIO_KINDS, RouteSpec, ScenarioSpec, build_world
from .harness import ConstantDriver, EarlyTerminationDriver, Limits, run_route, run_world

__all__ = [
    "DT", "INFRACTION_TYPES", "InfractionLedger", "StopSign", "TrafficLight", "VehicleState",
    "World", "step_world", "SCENARIO_KINDS", "RouteSpec", "ScenarioSpec", "build_world",
    "ConstantDriver", "EarlyTerminationDriver", "Limits", "run_route", "run_world",
]
