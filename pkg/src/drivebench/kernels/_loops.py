"""Scalar-loop kernels, compiled with numba when the accelerator is enabled.

Boxes are float64 rows ``[x, y, yaw, half_length, half_width]``.
Actor rows are ``[x, y, yaw, speed, steer, accel, half_length, half_width, is_pedestrian]``.
Vehicle parameters are ``[lf, lr, max_steer, a_throttle, a_brake, drag]``.
Lateral gains are ``[kp, ki, kd]``; PID state is ``[integral, prev_error, has_prev]``.
"""
from __future__ import annotations

import math

import numpy as np

from .._accel import jit

TWO_PI = 2.0 * math.pi

# control constants shared with drivebench.control
CHECKPOINT_FIRST = 2.5
CHECKPOINT_COUNT = 10
LOOKAHEAD_SLOPE = 0.098
LOOKAHEAD_OFFSET = 0.192
MIN_TARGET_SPEED = 0.278  # below this the standstill hold applies (1 km/h)


@jit
def wrap_angle(a):
    return math.pi - (math.pi - a) % TWO_PI


@jit
def obb_overlap(a, b):
    """Closed-set SAT test between two boxes; touching counts as overlap."""
    dx = b[0] - a[0]
    dy = b[1] - a[1]
    ca = math.cos(a[2])
    sa = math.sin(a[2])
    cb = math.cos(b[2])
    sb = math.sin(b[2])
    r00 = abs(ca * cb + sa * sb)
    r01 = abs(-ca * sb + sa * cb)
    r10 = abs(-sa * cb + ca * sb)
    r11 = abs(sa * sb + ca * cb)
    if abs(dx * ca + dy * sa) > a[3] + b[3] * r00 + b[4] * r01:
        return False
    if abs(-dx * sa + dy * ca) > a[4] + b[3] * r10 + b[4] * r11:
        return False
    if abs(dx * cb + dy * sb) > a[3] * r00 + a[4] * r10 + b[3]:
        return False
    if abs(-dx * sb + dy * cb) > a[3] * r01 + a[4] * r11 + b[4]:
        return False
    return True


@jit
def obb_overlap_pairs(a, b):
    """Row-wise ``obb_overlap`` over two ``(n, 5)`` arrays."""
    n = a.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    for i in range(n):
        out[i] = obb_overlap(a[i], b[i])
    return out


@jit
def bicycle_step(x, y, yaw, v, steer, accel, dt, lf, lr):
    """Kinematic bicycle about the centre of gravity, midpoint heading rule."""
    beta = math.atan(lr / (lf + lr) * math.tan(steer))
    v_new = v + accel * dt
    if v_new < 0.0:
        dist = 0.0 if accel >= 0.0 else 0.5 * v * v / (-accel)
        v_new = 0.0
    else:
        dist = 0.5 * (v + v_new) * dt
    dyaw = dist / lr * math.sin(beta)
    heading = yaw + beta + 0.5 * dyaw
    x_new = x + dist * math.cos(heading)
    y_new = y + dist * math.sin(heading)
    return x_new, y_new, wrap_angle(yaw + dyaw), v_new


@jit
def vehicle_accel(v, throttle, brake, a_throttle, a_brake, drag):
    a = a_throttle * throttle - a_brake * brake - drag * v * v
    if v <= 0.0 and a < 0.0:
        a = 0.0
    return a


@jit
def project_window(px, py, cum, x, y, lo, hi):
    """Closest point on segments ``lo..hi-1``; returns (arc, lateral, segment)."""
    n_seg = px.shape[0] - 1
    if lo < 0:
        lo = 0
    if hi > n_seg:
        hi = n_seg
    if hi <= lo:
        lo = max(0, min(lo, n_seg - 1))
        hi = lo + 1
    best_d2 = np.inf
    best_arc = 0.0
    best_lat = 0.0
    best_i = lo
    for i in range(lo, hi):
        ax = px[i]
        ay = py[i]
        sx = px[i + 1] - ax
        sy = py[i + 1] - ay
        seg_len = cum[i + 1] - cum[i]
        l2 = sx * sx + sy * sy
        t = ((x - ax) * sx + (y - ay) * sy) / l2
        if t < 0.0:
            t = 0.0
        elif t > 1.0:
            t = 1.0
        cx = ax + t * sx
        cy = ay + t * sy
        d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy)
        if d2 < best_d2:
            best_d2 = d2
            best_arc = cum[i] + t * seg_len
            cross = sx * (y - cy) - sy * (x - cx)
            best_lat = math.copysign(math.sqrt(d2), cross) if cross != 0.0 else 0.0
            best_i = i
    return best_arc, best_lat, best_i


@jit
def point_at_arc(px, py, cum, s):
    """Point and tangent heading at arc ``s``; extrapolates past both ends."""
    n = px.shape[0]
    i = np.searchsorted(cum, s, side="right") - 1
    if i < 0:
        i = 0
    if i > n - 2:
        i = n - 2
    sx = px[i + 1] - px[i]
    sy = py[i + 1] - py[i]
    t = (s - cum[i]) / (cum[i + 1] - cum[i])
    return px[i] + t * sx, py[i] + t * sy, math.atan2(sy, sx)


@jit
def checkpoint_index(v_kmh):
    d = LOOKAHEAD_SLOPE * v_kmh + LOOKAHEAD_OFFSET
    k = int(math.floor(d - CHECKPOINT_FIRST + 1e-12))
    if k < 0:
        k = 0
    if k > CHECKPOINT_COUNT - 1:
        k = CHECKPOINT_COUNT - 1
    return k


@jit
def checkpoint_in_ego_frame(px, py, cum, s_ego, k, x, y, yaw):
    cx, cy, _ = point_at_arc(px, py, cum, s_ego + CHECKPOINT_FIRST + k)
    dx = cx - x
    dy = cy - y
    c = math.cos(yaw)
    s = math.sin(yaw)
    return c * dx + s * dy, -s * dx + c * dy


@jit
def pid_step(err, state, gains, dt, max_steer):
    """Steering PID on a heading error; integrator frozen while saturated."""
    deriv = 0.0
    if state[2] > 0.5:
        deriv = (err - state[1]) / dt
    integ = state[0] + err * dt
    out = gains[0] * err + gains[1] * integ + gains[2] * deriv
    if out > max_steer:
        out = max_steer
    elif out < -max_steer:
        out = -max_steer
    else:
        state[0] = integ
    state[1] = err
    state[2] = 1.0
    return out


@jit
def lon_command(v, v_target, coef):
    """Signed pedal command from the linear model; a near-zero target that
    does not ask for acceleration holds the brake."""
    if v_target < MIN_TARGET_SPEED and v_target <= v:
        return -1.0
    d = v_target - v
    u = coef[0] + coef[1] * v + coef[2] * d + coef[3] * max(d, 0.0)
    if u > 1.0:
        u = 1.0
    elif u < -1.0:
        u = -1.0
    return u


@jit
def rollout_ego(x, y, yaw, v, steer, px, py, cum, seg_hint, target_speed,
                n_steps, dt, vparams, gains, pid_state, lon_coef, hl, hw):
    """Closed-loop ego footprint sequence under the real controllers.

    ``pid_state`` is copied, the caller's controller is not advanced.
    """
    boxes = np.empty((n_steps + 1, 5))
    st = pid_state.copy()
    hint = seg_hint
    boxes[0, 0] = x
    boxes[0, 1] = y
    boxes[0, 2] = yaw
    boxes[0, 3] = hl
    boxes[0, 4] = hw
    for t in range(n_steps):
        s_ego, _, hint = project_window(px, py, cum, x, y, hint - 3, hint + 12)
        k = checkpoint_index(v * 3.6)
        tx, ty = checkpoint_in_ego_frame(px, py, cum, s_ego, k, x, y, yaw)
        steer = pid_step(math.atan2(ty, tx), st, gains, dt, vparams[2])
        u = lon_command(v, target_speed, lon_coef)
        thr = u if u > 0.0 else 0.0
        brk = -u if u < 0.0 else 0.0
        a = vehicle_accel(v, thr, brk, vparams[3], vparams[4], vparams[5])
        x, y, yaw, v = bicycle_step(x, y, yaw, v, steer, a, dt, vparams[0], vparams[1])
        boxes[t + 1, 0] = x
        boxes[t + 1, 1] = y
        boxes[t + 1, 2] = yaw
        boxes[t + 1, 3] = hl
        boxes[t + 1, 4] = hw
    return boxes


@jit
def forecast_actors(actors, n_steps, dt, lf, lr):
    """Hold each actor's last controls; pedestrians walk at constant velocity."""
    n = actors.shape[0]
    out = np.empty((n, n_steps + 1, 5))
    for i in range(n):
        x = actors[i, 0]
        y = actors[i, 1]
        yaw = actors[i, 2]
        v = actors[i, 3]
        steer = actors[i, 4]
        acc = actors[i, 5]
        ped = actors[i, 8] > 0.5
        for t in range(n_steps + 1):
            if t > 0:
                if ped:
                    x += v * math.cos(yaw) * dt
                    y += v * math.sin(yaw) * dt
                else:
                    x, y, yaw, v = bicycle_step(x, y, yaw, v, steer, acc, dt, lf, lr)
            out[i, t, 0] = x
            out[i, t, 1] = y
            out[i, t, 2] = yaw
            out[i, t, 3] = actors[i, 6]
            out[i, t, 4] = actors[i, 7]
    return out


@jit
def first_aligned_hit(ego_boxes, actor_boxes):
    """First (actor, step) whose boxes overlap the ego's at the same step."""
    n = actor_boxes.shape[0]
    steps = ego_boxes.shape[0]
    for t in range(steps):
        for i in range(n):
            if obb_overlap(ego_boxes[t], actor_boxes[i, t]):
                return i, t
    return -1, -1


@jit
def corridor_hits(actor_boxes, px, py, cum, seg_lo, s_max, half_width):
    """Smallest path arc at which each actor's boxes enter the path corridor.

    Returns ``(arc, step)`` arrays; ``arc`` is ``inf`` for actors that never enter.
    """
    n = actor_boxes.shape[0]
    steps = actor_boxes.shape[1]
    n_seg = px.shape[0] - 1
    arcs = np.full(n, np.inf)
    hit_t = np.full(n, -1, dtype=np.int64)
    seg_box = np.empty(5)
    corners = np.empty((4, 2))
    for i in range(n):
        for t in range(steps):
            b = actor_boxes[i, t]
            rad_b = math.sqrt(b[3] * b[3] + b[4] * b[4])
            cb = math.cos(b[2])
            sb = math.sin(b[2])
            corners[0, 0] = b[0] + b[3] * cb - b[4] * sb
            corners[0, 1] = b[1] + b[3] * sb + b[4] * cb
            corners[1, 0] = b[0] + b[3] * cb + b[4] * sb
            corners[1, 1] = b[1] + b[3] * sb - b[4] * cb
            corners[2, 0] = b[0] - b[3] * cb + b[4] * sb
            corners[2, 1] = b[1] - b[3] * sb - b[4] * cb
            corners[3, 0] = b[0] - b[3] * cb - b[4] * sb
            corners[3, 1] = b[1] - b[3] * sb + b[4] * cb
            j = max(seg_lo, 0)
            while j < n_seg and cum[j] < s_max:
                if cum[j] >= arcs[i]:
                    break
                ax = px[j]
                ay = py[j]
                sx = px[j + 1] - ax
                sy = py[j + 1] - ay
                seg_len = cum[j + 1] - cum[j]
                ux = sx / seg_len
                uy = sy / seg_len
                seg_box[0] = ax + 0.5 * sx
                seg_box[1] = ay + 0.5 * sy
                seg_box[2] = math.atan2(sy, sx)
                seg_box[3] = 0.5 * seg_len + 0.25
                seg_box[4] = half_width
                rad_s = math.sqrt(seg_box[3] * seg_box[3] + half_width * half_width)
                ddx = b[0] - seg_box[0]
                ddy = b[1] - seg_box[1]
                if ddx * ddx + ddy * ddy <= (rad_b + rad_s) * (rad_b + rad_s):
                    if obb_overlap(seg_box, b):
                        s_hit = np.inf
                        for c in range(4):
                            sc = (corners[c, 0] - ax) * ux + (corners[c, 1] - ay) * uy
                            if sc < s_hit:
                                s_hit = sc
                        if s_hit < 0.0:
                            s_hit = 0.0
                        if s_hit > seg_len:
                            s_hit = seg_len
                        s_hit += cum[j]
                        if s_hit < arcs[i]:
                            arcs[i] = s_hit
                            hit_t[i] = t
                j += 1
    return arcs, hit_t
