"""Hot numeric kernels.

Sequential kernels (integration, projection, rollout) always come from
``_loops``; they are numba-compiled when the accelerator is on and run as plain
Python otherwise. Batch kernels switch to vectorized numpy on the fallback path.
"""
from .._accel import USE_NUMBA, backend_name
from . import _loops
from ._loops import (
    bicycle_step,
    checkpoint_in_ego_frame,
    checkpoint_index,
    lon_command,
    obb_overlap,
    pid_step,
    point_at_arc,
    project_window,
    rollout_ego,
    vehicle_accel,
    wrap_angle,
)

if USE_NUMBA:
    from ._loops import corridor_hits, first_aligned_hit, forecast_actors, obb_overlap_pairs
else:
    from ._vectorized import corridor_hits, first_aligned_hit, forecast_actors, obb_overlap_pairs

__all__ = [
    "USE_NUMBA",
    "backend_name",
    "bicycle_step",
    "checkpoint_in_ego_frame",
    "checkpoint_index",
    "corridor_hits",
    "first_aligned_hit",
    "forecast_actors",
    "lon_command",
    "obb_overlap",
    "obb_overlap_pairs",
    "pid_step",
    "point_at_arc",
    "project_window",
    "rollout_ego",
    "vehicle_accel",
    "wrap_angle",
]
