"""Frame logs, two-hot target-speed labels, class weights and the
change-detection filter."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from itertools import groupby
from pathlib import Path

import numpy as np

from .control import CHECKPOINT_COUNT

SPEED_CLASSES = np.array([0.0, 4.0, 8.0, 10.0, 13.89, 16.0, 17.78, 20.0])
N_CLASSES = len(SPEED_CLASSES)
MAX_SPEED = float(SPEED_CLASSES[-1])
LOG_FORMAT = "drivebench-frames"
LOG_VERSION = 1


class DataError(ValueError):
    """Malformed input data; carries an optional source location."""

    def __init__(self, message: str, source: str | None = None, line: int | None = None):
        loc = ""
        if source is not None:
            loc = f"{source}:{line}: " if line is not None else f"{source}: "
        super().__init__(loc + message)
        self.source = source
        self.line = line


# ---------------------------------------------------------------- two-hot

@dataclass(frozen=True)
class TwoHotLabel:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (N_CLASSES,):
            raise DataError(f"two-hot label needs {N_CLASSES} weights, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise DataError("two-hot weights must be finite and non-negative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise DataError(f"two-hot weights sum to {w.sum()!r}, expected 1")
        nz = np.flatnonzero(w)
        if len(nz) > 2 or (len(nz) == 2 and nz[1] - nz[0] != 1):
            raise DataError("two-hot label may only weight two adjacent classes")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def encode_two_hot(v: float) -> TwoHotLabel:
    """Split ``v`` linearly between the two bracketing speed classes."""
    v = min(max(float(v), 0.0), MAX_SPEED)
    w = np.zeros(N_CLASSES)
    hi = int(np.searchsorted(SPEED_CLASSES, v, side="left"))
    if SPEED_CLASSES[hi] == v:
        w[hi] = 1.0
    else:
        lo = hi - 1
        c_lo, c_hi = SPEED_CLASSES[lo], SPEED_CLASSES[hi]
        w_hi = (v - c_lo) / (c_hi - c_lo)
        w[hi] = w_hi
        w[lo] = 1.0 - w_hi
    return TwoHotLabel(w)


def decode_two_hot(label) -> float:
    if not isinstance(label, TwoHotLabel):
        label = TwoHotLabel(label)
    return float(label.weights @ SPEED_CLASSES)


# ---------------------------------------------------------- class weights

@dataclass(frozen=True)
class ClassWeights:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (N_CLASSES,) or np.any(~(w > 0)):
            raise DataError("class weights must be 8 positive numbers")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)


def class_weights(class_counts) -> ClassWeights:
    """Inverse-frequency weights ``N / (K * n_c)``; mean one over the samples."""
    n = np.asarray(class_counts)
    if n.shape != (N_CLASSES,):
        raise DataError(f"expected {N_CLASSES} class counts, got shape {n.shape}")
    if np.any(n < 0) or np.any(n != np.floor(n)):
        raise DataError("class counts must be non-negative integers")
    if np.any(n == 0):
        missing = [float(SPEED_CLASSES[i]) for i in np.flatnonzero(n == 0)]
        raise DataError(f"classes absent from the data: {missing}")
    n = n.astype(float)
    return ClassWeights(n.sum() / (N_CLASSES * n))


def class_counts(speeds) -> np.ndarray:
    """Occurrences of the dominant two-hot class for each target speed."""
    counts = np.zeros(N_CLASSES, dtype=np.int64)
    for v in speeds:
        counts[int(np.argmax(encode_two_hot(v).weights))] += 1
    return counts


# ------------------------------------------------------------- frame logs

@dataclass
class FrameRecord:
    route_id: str
    frame_index: int
    sim_time: float
    x: float
    y: float
    yaw: float
    speed: float
    target_speed_label: float
    checkpoints: np.ndarray
    events: list = field(default_factory=list)

    def __post_init__(self):
        cp = np.asarray(self.checkpoints, dtype=float)
        if cp.shape != (CHECKPOINT_COUNT, 2):
            raise DataError(f"frame needs {CHECKPOINT_COUNT} checkpoints, got shape {cp.shape}")
        self.checkpoints = cp
        if not 0.0 <= self.target_speed_label <= MAX_SPEED:
            raise DataError(f"target_speed_label {self.target_speed_label} outside [0, {MAX_SPEED}]")

    def bearings(self) -> np.ndarray:
        return np.arctan2(self.checkpoints[:, 1], self.checkpoints[:, 0])

    def to_dict(self) -> dict:
        return {
            "route_id": self.route_id,
            "frame_index": self.frame_index,
            "sim_time": self.sim_time,
            "x": self.x,
            "y": self.y,
            "yaw": self.yaw,
            "speed": self.speed,
            "target_speed_label": self.target_speed_label,
            "checkpoints": self.checkpoints.tolist(),
            "events": self.events,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FrameRecord":
        return cls(
            route_id=str(d["route_id"]),
            frame_index=int(d["frame_index"]),
            sim_time=float(d["sim_time"]),
            x=float(d["x"]),
            y=float(d["y"]),
            yaw=float(d["yaw"]),
            speed=float(d["speed"]),
            target_speed_label=float(d["target_speed_label"]),
            checkpoints=np.asarray(d["checkpoints"], dtype=float),
            events=list(d.get("events", [])),
        )


def write_frames(path, frames) -> None:
    """JSON Lines: a header record, then one frame per line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"format": LOG_FORMAT, "version": LOG_VERSION}) + "\n")
        for fr in frames:
            fh.write(json.dumps(fr.to_dict(), separators=(",", ":")) + "\n")


def read_frames(path) -> list[FrameRecord]:
    path = Path(path)
    frames = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline()
        try:
            head = json.loads(header)
        except json.JSONDecodeError:
            raise DataError("missing or malformed header line", str(path), 1) from None
        if not isinstance(head, dict) or head.get("format") != LOG_FORMAT:
            raise DataError(f"not a {LOG_FORMAT} log", str(path), 1)
        if head.get("version") != LOG_VERSION:
            raise DataError(f"unsupported log version {head.get('version')!r}", str(path), 1)
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                frames.append(FrameRecord.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataError(f"bad frame record ({exc})", str(path), lineno) from None
    return frames


# ---------------------------------------------------------------- filter

@dataclass(frozen=True)
class FilterStats:
    n_frames: int = 0
    n_change: int = 0
    n_kept: int = 0
    n_routes: int = 0

    @property
    def change_fraction(self) -> float:
        return self.n_change / self.n_frames if self.n_frames else 0.0

    @property
    def kept_fraction(self) -> float:
        return self.n_kept / self.n_frames if self.n_frames else 0.0

    def as_dict(self) -> dict:
        return {
            "frames": self.n_frames,
            "routes": self.n_routes,
            "change_frames": self.n_change,
            "kept_frames": self.n_kept,
            "change_fraction": self.change_fraction,
            "kept_fraction": self.kept_fraction,
        }


def retention_draw(seed: int, route_id: str, frame_index: int) -> float:
    """Uniform [0, 1) value derived from (seed, route, frame) alone."""
    key = f"{int(seed)}\x1f{route_id}\x1f{int(frame_index)}".encode()
    digest = hashlib.blake2b(key, digest_size=8).digest()
    return int.from_bytes(digest, "little") / 2.0 ** 64


def change_mask(frames, dv: float = 0.1, dangle: float = 0.5) -> np.ndarray:
    """Change flags for one route's frames; the first frame is never a change."""
    n = len(frames)
    mask = np.zeros(n, dtype=bool)
    if n < 2:
        return mask
    ts = np.array([f.target_speed_label for f in frames])
    bear = np.array([f.bearings() for f in frames])
    dbear = np.abs(np.diff(bear, axis=0))
    dbear = np.minimum(dbear, 2.0 * np.pi - dbear).max(axis=1)
    mask[1:] = (np.abs(np.diff(ts)) > dv) | (dbear > math.radians(dangle))
    return mask


def filter_frames(log, dv: float = 0.1, dangle: float = 0.5, keep_frac: float = 0.14,
                  seed: int = 0):
    """Keep change frames, the first frame of each route, and a seeded random
    share ``keep_frac`` of the rest."""
    if not 0.0 <= keep_frac <= 1.0:
        raise DataError("keep_frac must lie in [0, 1]")
    kept: list[FrameRecord] = []
    n_frames = n_change = n_routes = 0
    seen = set()
    for route_id, group in groupby(log, key=lambda f: f.route_id):
        if route_id in seen:
            raise DataError(f"route {route_id!r}: frames are not contiguous in the log")
        seen.add(route_id)
        frames = list(group)
        idx = [f.frame_index for f in frames]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise DataError(f"route {route_id!r}: frame_index not strictly increasing")
        mask = change_mask(frames, dv, dangle)
        n_routes += 1
        n_frames += len(frames)
        n_change += int(mask.sum())
        for i, (fr, ch) in enumerate(zip(frames, mask)):
            if i == 0 or ch or retention_draw(seed, route_id, fr.frame_index) < keep_frac:
                kept.append(fr)
    return kept, FilterStats(n_frames, n_change, len(kept), n_routes)


def constant_cruise_frames(n: int = 2000, speed: float = 10.0, route_id: str = "constant_cruise",
                           dt: float = 0.05) -> list[FrameRecord]:
    """Synthetic log of a straight cruise at constant speed: no frame is a change frame."""
    from .control import CHECKPOINT_DISTANCES

    cps = np.column_stack([CHECKPOINT_DISTANCES, np.zeros(CHECKPOINT_COUNT)])
    return [FrameRecord(route_id, i, i * dt, i * dt * speed, 0.0, 0.0, speed, speed, cps.copy())
            for i in range(n)]
