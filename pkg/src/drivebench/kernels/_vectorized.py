"""Pure-numpy versions of the batch kernels (used when numba is disabled)."""
from __future__ import annotations

import numpy as np


def obb_overlap_pairs(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    dx = b[..., 0] - a[..., 0]
    dy = b[..., 1] - a[..., 1]
    ca, sa = np.cos(a[..., 2]), np.sin(a[..., 2])
    cb, sb = np.cos(b[..., 2]), np.sin(b[..., 2])
    r00 = np.abs(ca * cb + sa * sb)
    r01 = np.abs(-ca * sb + sa * cb)
    r10 = np.abs(-sa * cb + ca * sb)
    r11 = np.abs(sa * sb + ca * cb)
    sep = np.abs(dx * ca + dy * sa) > a[..., 3] + b[..., 3] * r00 + b[..., 4] * r01
    sep |= np.abs(-dx * sa + dy * ca) > a[..., 4] + b[..., 3] * r10 + b[..., 4] * r11
    sep |= np.abs(dx * cb + dy * sb) > a[..., 3] * r00 + a[..., 4] * r10 + b[..., 3]
    sep |= np.abs(-dx * sb + dy * cb) > a[..., 3] * r01 + a[..., 4] * r11 + b[..., 4]
    return ~sep


def _bicycle_step(x, y, yaw, v, steer, accel, dt, lf, lr):
    beta = np.arctan(lr / (lf + lr) * np.tan(steer))
    v_new = v + accel * dt
    stopped = v_new < 0.0
    safe_acc = np.where(accel < 0.0, accel, -1.0)
    dist = np.where(
        stopped,
        np.where(accel >= 0.0, 0.0, 0.5 * v * v / -safe_acc),
        0.5 * (v + v_new) * dt,
    )
    v_new = np.where(stopped, 0.0, v_new)
    dyaw = dist / lr * np.sin(beta)
    heading = yaw + beta + 0.5 * dyaw
    new_yaw = yaw + dyaw
    new_yaw = np.pi - (np.pi - new_yaw) % (2.0 * np.pi)
    return x + dist * np.cos(heading), y + dist * np.sin(heading), new_yaw, v_new


def forecast_actors(actors, n_steps, dt, lf, lr):
    actors = np.asarray(actors, dtype=float)
    n = actors.shape[0]
    out = np.empty((n, n_steps + 1, 5))
    x, y, yaw, v = (actors[:, k].copy() for k in range(4))
    steer, acc = actors[:, 4], actors[:, 5]
    ped = actors[:, 8] > 0.5
    vx, vy = v * np.cos(yaw), v * np.sin(yaw)
    out[:, :, 3] = actors[:, 6:7]
    out[:, :, 4] = actors[:, 7:8]
    for t in range(n_steps + 1):
        if t > 0:
            bx, by, byaw, bv = _bicycle_step(x, y, yaw, v, steer, acc, dt, lf, lr)
            x = np.where(ped, x + vx * dt, bx)
            y = np.where(ped, y + vy * dt, by)
            yaw = np.where(ped, yaw, byaw)
            v = np.where(ped, v, bv)
        out[:, t, 0] = x
        out[:, t, 1] = y
        out[:, t, 2] = yaw
    return out


def first_aligned_hit(ego_boxes, actor_boxes):
    if actor_boxes.shape[0] == 0:
        return -1, -1
    # (steps, n) overlap table, scanned step-major like the loop kernel
    hits = obb_overlap_pairs(ego_boxes[:, None, :], np.swapaxes(actor_boxes, 0, 1))
    idx = np.argwhere(hits)
    if idx.shape[0] == 0:
        return -1, -1
    t, i = idx[0]
    return int(i), int(t)


def corridor_hits(actor_boxes, px, py, cum, seg_lo, s_max, half_width):
    n = actor_boxes.shape[0]
    arcs = np.full(n, np.inf)
    hit_t = np.full(n, -1, dtype=np.int64)
    n_seg = px.shape[0] - 1
    lo = max(int(seg_lo), 0)
    hi = lo
    while hi < n_seg and cum[hi] < s_max:
        hi += 1
    if n == 0 or hi == lo:
        return arcs, hit_t
    ax, ay = px[lo:hi], py[lo:hi]
    sx, sy = px[lo + 1:hi + 1] - ax, py[lo + 1:hi + 1] - ay
    seg_len = cum[lo + 1:hi + 1] - cum[lo:hi]
    ux, uy = sx / seg_len, sy / seg_len
    seg = np.stack(
        [ax + 0.5 * sx, ay + 0.5 * sy, np.arctan2(sy, sx), 0.5 * seg_len + 0.25,
         np.full_like(seg_len, half_width)],
        axis=-1,
    )
    b = actor_boxes[:, :, None, :]  # (n, T, 1, 5)
    overlap = obb_overlap_pairs(seg[None, None, :, :], b)  # (n, T, m)
    cb, sb = np.cos(b[..., 2]), np.sin(b[..., 2])
    hl, hw = b[..., 3], b[..., 4]
    cx = np.stack([b[..., 0] + hl * cb - hw * sb, b[..., 0] + hl * cb + hw * sb,
                   b[..., 0] - hl * cb + hw * sb, b[..., 0] - hl * cb - hw * sb], axis=-1)
    cy = np.stack([b[..., 1] + hl * sb + hw * cb, b[..., 1] + hl * sb - hw * cb,
                   b[..., 1] - hl * sb - hw * cb, b[..., 1] - hl * sb + hw * cb], axis=-1)
    # corners (n, T, 1, 4) projected on every segment tangent -> (n, T, m)
    proj = ((cx - ax[:, None]) * ux[:, None] + (cy - ay[:, None]) * uy[:, None]).min(axis=-1)
    s_hit = np.clip(proj, 0.0, seg_len) + cum[lo:hi]
    s_hit = np.where(overlap, s_hit, np.inf)
    flat = s_hit.reshape(n, -1)
    best = flat.argmin(axis=1)
    arcs = flat[np.arange(n), best]
    n_seg_win = s_hit.shape[2]
    hit_t = np.where(np.isfinite(arcs), best // n_seg_win, -1).astype(np.int64)
    return arcs, hit_t
