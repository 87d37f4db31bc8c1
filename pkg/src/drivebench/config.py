"""TOML configuration: style preset files, controller gains and run overrides.

A gains file looks like::

    [pid]
    kp = 1.0
    ki = 0.02
    kd = 0.05

    [lon]
    coef = [c0, c1, c2, c3]   # features [1, v, dv, max(dv, 0)]
"""
from __future__ import annotations

import re
import sys
from dataclasses import fields
from importlib import resources
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .control import LateralPID, LonModel
from .dataset import DataError
from .planner import IdmParams, StylePreset, get_preset

_IDM_KEYS = {f.name for f in fields(IdmParams)}
_PID_KEYS = {"kp", "ki", "kd", "max_steer"}


def load_toml(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read: {exc.strerror}", str(path)) from None
    return loads_toml(text, str(path))


def loads_toml(text: str, source: str = "<config>") -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise DataError(f"TOML syntax error: {exc}", source, int(m.group(1)) if m else None) from None


def bundled_presets_path() -> Path:
    return Path(str(resources.files("drivebench") / "data" / "presets" / "styles.toml"))


def presets_from_mapping(doc: dict, source: str = "<presets>") -> dict[str, StylePreset]:
    """Parse ``[style.<name>]`` tables; ``base`` may name an earlier table or a built-in preset."""
    out: dict[str, StylePreset] = {}
    for name, table in doc.get("style", {}).items():
        table = dict(table)
        base = table.pop("base", None)
        unknown = set(table) - _IDM_KEYS
        if unknown:
            raise DataError(f"style {name!r}: unknown keys {sorted(unknown)}", source)
        if base is None:
            start = IdmParams()
        elif base in out:
            start = out[base].idm
        else:
            try:
                start = get_preset(base).idm
            except ValueError as exc:
                raise DataError(f"style {name!r}: {exc}", source) from None
        try:
            idm = IdmParams(**{**_as_dict(start), **{k: float(v) for k, v in table.items()}})
        except (TypeError, ValueError) as exc:
            raise DataError(f"style {name!r}: {exc}", source) from None
        out[name] = StylePreset(name, idm)
    return out


def load_presets(path=None) -> dict[str, StylePreset]:
    path = bundled_presets_path() if path is None else Path(path)
    return presets_from_mapping(load_toml(path), str(path))


def apply_idm_overrides(preset: StylePreset, values: dict, source: str = "<config>") -> StylePreset:
    unknown = set(values) - _IDM_KEYS
    if unknown:
        raise DataError(f"[idm]: unknown keys {sorted(unknown)}", source)
    try:
        idm = IdmParams(**{**_as_dict(preset.idm), **{k: float(v) for k, v in values.items()}})
    except (TypeError, ValueError) as exc:
        raise DataError(f"[idm]: {exc}", source) from None
    return StylePreset(preset.name, idm)


def controllers_from_mapping(doc: dict, source: str = "<gains>"):
    """(LateralPID template or None, LonModel or None) from ``[pid]`` / ``[lon]`` tables."""
    pid = lon = None
    if "pid" in doc:
        table = doc["pid"]
        unknown = set(table) - _PID_KEYS
        if unknown:
            raise DataError(f"[pid]: unknown keys {sorted(unknown)}", source)
        try:
            pid = LateralPID(**{k: float(v) for k, v in table.items()})
        except (TypeError, ValueError) as exc:
            raise DataError(f"[pid]: {exc}", source) from None
        if min(pid.kp, pid.ki, pid.kd) < 0 or not pid.max_steer > 0:
            raise DataError("[pid]: gains must be non-negative and max_steer positive", source)
    if "lon" in doc:
        try:
            lon = LonModel(doc["lon"]["coef"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"[lon]: {exc}", source) from None
    return pid, lon


def load_gains(path):
    return controllers_from_mapping(load_toml(path), str(path))


def _as_dict(idm: IdmParams) -> dict:
    return {f.name: getattr(idm, f.name) for f in fields(idm)}
