"""TOML suite files.

Schema (version 1)::

    version = 1

    [[route]]
    id = "plain"
    start = [0.0, 0.0, 0.0]                   # x, y (m), heading (deg)
    geometry = [["line", 150], ["arc", 60, 45]]  # or target_points = [[x, y], ...]
    speed_limit = 20.0                        # m/s
    hazards = { CV = 1.65 }                   # optional, events per km

    [[route.scenario]]
    kind = "PlainRoute"
    trigger_arc = 140.0
    stop_sign = true                          # remaining keys are kind parameters
"""
from __future__ import annotations

import re
import sys
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..dataset import DataError
from ..route import RouteError
from .scenarios import RouteSpec, ScenarioSpec

SUITE_VERSION = 1
BUNDLED = ("bundled", "hazard")
_ROUTE_KEYS = {"id", "start", "geometry", "target_points", "speed_limit", "hazards", "scenario"}
_HEADER = re.compile(r"^\s*\[\[\s*route\s*\]\]")


def bundled_suite_path(name: str) -> Path:
    if name not in BUNDLED:
        raise DataError(f"unknown bundled suite {name!r}; choose from {BUNDLED}")
    return Path(str(resources.files("drivebench") / "data" / "suite" / f"{name}.toml"))


def resolve_suite(spec: str) -> Path:
    """A bundled suite name or a path."""
    if spec in BUNDLED:
        return bundled_suite_path(spec)
    return Path(spec)


def load_suite(path) -> list[RouteSpec]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read suite: {exc.strerror}", str(path)) from None
    return parse_suite(text, str(path))


def parse_suite(text: str, source: str = "<suite>") -> list[RouteSpec]:
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        if line is None:
            m = re.search(r"line (\d+)", str(exc))
            line = int(m.group(1)) if m else None
        raise DataError(f"TOML syntax error: {exc}", source, line) from None
    headers = [i + 1 for i, ln in enumerate(text.splitlines()) if _HEADER.match(ln)]
    version = doc.get("version", SUITE_VERSION)
    if version != SUITE_VERSION:
        raise DataError(f"unsupported suite version {version!r}", source, 1)
    routes = []
    seen = set()
    for i, raw in enumerate(doc.get("route", [])):
        line = headers[i] if i < len(headers) else None
        try:
            route = _route(raw)
        except (RouteError, KeyError, TypeError, ValueError) as exc:
            msg = f"missing key {exc}" if isinstance(exc, KeyError) else str(exc)
            raise DataError(f"route #{i + 1}: {msg}", source, line) from None
        if route.route_id in seen:
            raise DataError(f"duplicate route id {route.route_id!r}", source, line)
        seen.add(route.route_id)
        routes.append(route)
    return routes


def _route(raw: dict) -> RouteSpec:
    unknown = set(raw) - _ROUTE_KEYS
    if unknown:
        raise ValueError(f"unknown route keys {sorted(unknown)}")
    scen = []
    for s in raw.get("scenario", []):
        s = dict(s)
        kind = s.pop("kind")
        trigger = float(s.pop("trigger_arc"))
        scen.append(ScenarioSpec(kind, trigger, s))
    geometry = raw.get("geometry")
    if geometry is not None:
        geometry = [tuple(g) for g in geometry]
    tps = raw.get("target_points")
    if tps is not None:
        tps = [tuple(map(float, p)) for p in tps]
    start = tuple(float(v) for v in raw.get("start", (0.0, 0.0, 0.0)))
    if len(start) != 3:
        raise ValueError("start must be [x, y, heading_deg]")
    return RouteSpec(
        route_id=str(raw["id"]),
        target_points=tps,
        geometry=geometry,
        start=start,
        speed_limit=float(raw.get("speed_limit", 20.0)),
        scenarios=scen,
        hazards={str(k): float(v) for k, v in raw.get("hazards", {}).items()},
    )
