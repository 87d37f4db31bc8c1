"""Lateral PID with speed-dependent checkpoint lookahead, and a linear
longitudinal model mapping (speed, target speed) to throttle/brake."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import kernels
from .kernels._loops import CHECKPOINT_COUNT, CHECKPOINT_FIRST, LOOKAHEAD_OFFSET, LOOKAHEAD_SLOPE
from .vehicle import CAR, VehicleParams

DT = 0.05
CHECKPOINT_DISTANCES = CHECKPOINT_FIRST + np.arange(CHECKPOINT_COUNT, dtype=float)


class ControlError(ValueError):
    pass


def lookahead_distance(v_kmh: float) -> float:
    """Distance of the steering target in metres for a speed in km/h."""
    return LOOKAHEAD_SLOPE * v_kmh + LOOKAHEAD_OFFSET


@dataclass(frozen=True)
class Checkpoints:
    """Ten path points in the ego frame, nominally 2.5 m, 3.5 m, ... ahead."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.shape != (CHECKPOINT_COUNT, 2):
            raise ControlError(f"expected {CHECKPOINT_COUNT} checkpoints, got shape {pts.shape}")
        object.__setattr__(self, "points", pts)

    def bearings(self) -> np.ndarray:
        return np.arctan2(self.points[:, 1], self.points[:, 0])

    @classmethod
    def from_path(cls, xs, ys, cum, s_ego: float, x: float, y: float, yaw: float) -> "Checkpoints":
        pts = [kernels.checkpoint_in_ego_frame(xs, ys, cum, s_ego, k, x, y, yaw)
               for k in range(CHECKPOINT_COUNT)]
        return cls(np.array(pts))


def select_checkpoint(cps: Checkpoints, v_kmh: float) -> np.ndarray:
    """Checkpoint with the largest nominal distance not beyond the lookahead."""
    return cps.points[kernels.checkpoint_index(float(v_kmh))]


@dataclass
class LateralPID:
    kp: float = 1.0
    ki: float = 0.02
    kd: float = 0.05
    max_steer: float = CAR.max_steer
    state: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def gains(self) -> np.ndarray:
        return np.array([self.kp, self.ki, self.kd])

    def reset(self):
        self.state[:] = 0.0

    def step(self, target_point, dt: float = DT) -> float:
        err = math.atan2(target_point[1], target_point[0])
        return float(kernels.pid_step(err, self.state, self.gains, dt, self.max_steer))


def lateral_pid(pid: LateralPID, target_point, dt: float = DT) -> float:
    return pid.step(target_point, dt)


@dataclass(frozen=True)
class LonModel:
    """Linear pedal model over the features ``[1, v, dv, max(dv, 0)]``,
    ``dv = v_target - v``. Positive output is throttle, negative is brake."""

    coef: np.ndarray
    residual_rms: float = 0.0

    def __post_init__(self):
        c = np.asarray(self.coef, dtype=float)
        if c.shape != (4,) or not np.all(np.isfinite(c)):
            raise ControlError("LonModel needs four finite coefficients")
        object.__setattr__(self, "coef", c)


def lon_features(v, v_target) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    d = np.asarray(v_target, dtype=float) - v
    return np.stack([np.ones_like(v), v, d, np.maximum(d, 0.0)], axis=-1)


def longitudinal_control(v: float, v_target: float, model: LonModel) -> tuple[float, float]:
    u = kernels.lon_command(float(v), float(v_target), model.coef)
    return (u, 0.0) if u > 0.0 else (0.0, -u)


def fit_lon_model(samples) -> LonModel:
    """Least-squares fit on ``(v, v_target, u_reference)`` samples."""
    arr = np.asarray(samples, dtype=float).reshape(-1, 3)
    X = lon_features(arr[:, 0], arr[:, 1])
    if X.shape[0] < 4 or np.linalg.matrix_rank(X) < 4:
        raise ControlError("rank-deficient design matrix: samples do not span the feature space")
    coef, *_ = np.linalg.lstsq(X, arr[:, 2], rcond=None)
    rms = float(np.sqrt(np.mean((X @ coef - arr[:, 2]) ** 2)))
    return LonModel(coef, rms)


def reference_pedal(v, v_target, vehicle: VehicleParams = CAR, dt: float = DT):
    """Saturating inverse-dynamics pedal: reach ``v_target`` in one tick."""
    v = np.asarray(v, dtype=float)
    a = (np.asarray(v_target, dtype=float) - v) / dt + vehicle.drag * v * v
    u = np.where(a >= 0.0, a / vehicle.a_throttle, a / vehicle.a_brake)
    return np.clip(u, -1.0, 1.0)


def reference_samples(vehicle: VehicleParams = CAR, dt: float = DT) -> np.ndarray:
    """Operating-window grid: speeds 0-20 m/s, speed errors inside the
    unsaturated band of the reference."""
    v = np.arange(0.0, 20.0 + 1e-9, 0.5)
    d = np.arange(-0.40, 0.25 + 1e-9, 0.01)
    vv, dd = np.meshgrid(v, d, indexing="ij")
    vt = np.maximum(vv + dd, 0.0)
    u = reference_pedal(vv, vt, vehicle, dt)
    return np.column_stack([vv.ravel(), vt.ravel(), u.ravel()])


@lru_cache(maxsize=None)
def default_lon_model() -> LonModel:
    return fit_lon_model(reference_samples())
