import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebench.geometry import (OrientedBox, Polyline, Pose2D, Segment, motion_crosses,
                                 normalize_angle, obb_intersects, project_onto,
                                 resample_equidistant)
from oracles import box, sampled_overlap, signed_separation

finite = st.floats(-50, 50, allow_nan=False)
angle = st.floats(-10, 10, allow_nan=False)
half = st.floats(0.05, 3.0)
boxes = st.builds(box, finite, finite, angle, half, half)


@given(angle)
def test_pose_yaw_is_normalized(a):
    yaw = Pose2D(0, 0, a).yaw
    assert -math.pi < yaw <= math.pi
    assert math.isclose(math.cos(yaw), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(yaw), math.sin(a), abs_tol=1e-9)


def test_normalize_angle_maps_minus_pi_to_pi():
    assert normalize_angle(-math.pi) == math.pi
    assert normalize_angle(3 * math.pi) == pytest.approx(math.pi)


def test_box_rejects_non_positive_extent():
    with pytest.raises(ValueError):
        OrientedBox(Pose2D(0, 0), 0.0, 1.0)


def test_identical_boxes_intersect():
    b = box(1, 2, 0.3, 2.0, 1.0)
    assert obb_intersects(b, b)


def test_far_unit_squares_do_not_intersect():
    assert not obb_intersects(box(0, 0, 0, 0.5, 0.5), box(10, 0, 0, 0.5, 0.5))


def test_touching_boxes_intersect():
    assert obb_intersects(box(0, 0, 0, 1, 1), box(2, 0, 0, 1, 1))


def test_rotated_corner_gap():
    # diamond tip 1.414 from its centre, square edge at 1.0
    a = box(0, 0, 0, 1, 1)
    assert not obb_intersects(a, box(2.45, 0, math.pi / 4, 1, 1))
    assert obb_intersects(a, box(2.40, 0, math.pi / 4, 1, 1))


@given(boxes, boxes)
def test_obb_symmetric(a, b):
    assert obb_intersects(a, b) == obb_intersects(b, a)


@given(boxes, boxes, angle, finite, finite)
def test_obb_rigid_motion_invariant(a, b, rot, tx, ty):
    if abs(signed_separation(a.as_array(), b.as_array())) < 1e-6:
        return

    def move(bx):
        c, s = math.cos(rot), math.sin(rot)
        x, y = bx.center.x, bx.center.y
        return box(c * x - s * y + tx, s * x + c * y + ty, bx.center.yaw + rot,
                   bx.half_length, bx.half_width)

    assert obb_intersects(a, b) == obb_intersects(move(a), move(b))


def test_obb_matches_sampling_oracle_on_10000_pairs():
    rng = np.random.default_rng(7)
    agree = checked = 0
    for _ in range(10_000):
        a = np.array([0.0, 0.0, rng.uniform(-np.pi, np.pi), *rng.uniform(0.05, 0.6, 2)])
        b = np.array([*rng.uniform(-1.5, 1.5, 2), rng.uniform(-np.pi, np.pi), *rng.uniform(0.05, 0.6, 2)])
        if abs(signed_separation(a, b)) <= 0.01:
            continue
        checked += 1
        sat = obb_intersects(OrientedBox.from_array(a), OrientedBox.from_array(b))
        oracle = sampled_overlap(a, b) or sampled_overlap(b, a)
        agree += sat == oracle
    assert checked > 9000
    assert agree == checked


def test_polyline_validation():
    with pytest.raises(ValueError):
        Polyline([(0, 0)])
    with pytest.raises(ValueError):
        Polyline([(0, 0), (0, 0), (1, 0)])
    p = Polyline([(0, 0), (3, 0), (3, 4)])
    assert p.length == 7.0
    assert np.all(np.diff(p.cum) > 0)


def test_project_first_vertex_and_axis_case():
    p = Polyline([(0, 0), (10, 0)])
    assert project_onto(p, (0, 0)) == (0.0, 0.0)
    s, lat = project_onto(p, (5, 1))
    assert (s, lat) == pytest.approx((5.0, 1.0))
    assert project_onto(p, (5, -2))[1] == pytest.approx(-2.0)


def test_project_near_corner_matches_dense_sampling():
    p = Polyline([(0, 0), (10, 0), (10, 10)])
    rng = np.random.default_rng(3)
    t = np.linspace(0, 1, 10_001)
    samples = np.vstack([np.column_stack([10 * t, 0 * t]), np.column_stack([10 + 0 * t, 10 * t])])
    arcs = np.concatenate([10 * t, 10 + 10 * t])
    for _ in range(50):
        q = np.array([10, 0]) + rng.uniform(-2, 2, 2)
        d = np.hypot(*(samples - q).T)
        i = int(np.argmin(d))
        s, lat = project_onto(p, q)
        assert abs(lat) == pytest.approx(d[i], abs=2e-3)
        if d[i] > 1e-3:
            # the corner is equidistant from a range of arcs; compare positions instead
            x, y, _ = p.point_at(s)
            assert math.hypot(x - q[0], y - q[1]) == pytest.approx(d[i], abs=2e-3)
        else:
            assert s == pytest.approx(arcs[i], abs=2e-3)


@given(st.floats(0, 1), st.integers(0, 2))
def test_project_on_path_has_zero_offset(frac, seg):
    pts = [(0, 0), (4, 1), (6, 5), (2, 9)]
    p = Polyline(pts)
    a, b = np.array(pts[seg]), np.array(pts[seg + 1])
    q = a + frac * (b - a)
    s, lat = project_onto(p, q)
    assert abs(lat) < 1e-9
    assert s == pytest.approx(p.cum[seg] + frac * np.hypot(*(b - a)), abs=1e-9)


def test_resample_straight():
    r = resample_equidistant(Polyline([(0, 0), (10, 0)]), 1.0)
    assert len(r) == 11
    assert np.allclose(r.xs, np.arange(11))


def test_resample_l_shape():
    src = Polyline([(0, 0), (3, 0), (3, 4)])
    r = resample_equidistant(src, 0.5)
    assert len(r) == 15
    # arc position of each output point re-projected on the input
    arcs = np.array([project_onto(src, q)[0] for q in r.points])
    assert np.allclose(arcs, np.arange(15) * 0.5, atol=1e-9)


def test_resample_rejects_degenerate():
    with pytest.raises(ValueError):
        resample_equidistant(Polyline([(0, 0), (0.5, 0)]), 1.0)
    with pytest.raises(ValueError):
        resample_equidistant(Polyline([(0, 0), (5, 0)]), 0.0)


@given(st.lists(st.tuples(st.floats(-100, 100), st.floats(-100, 100)), min_size=2, max_size=8),
       st.floats(0.2, 3.0))
def test_resample_properties(pts, spacing):
    try:
        src = Polyline(pts)
    except ValueError:
        return
    if src.length < spacing or np.any(np.diff(src.cum) < 1e-6):
        return
    r = resample_equidistant(src, spacing)
    assert np.allclose(r.points[0], src.points[0])
    assert r.length <= src.length + 1e-6
    # chords never exceed the arc they span; along straight legs they match
    gaps = np.diff(r.cum)
    assert np.all(gaps <= spacing + 1e-9)
    for q in r.points:
        assert abs(project_onto(src, q)[1]) < 1e-6


def test_resample_preserves_length_on_straight_legs():
    src = Polyline([(0, 0), (7.3, 0), (7.3, 5.2)])
    r = resample_equidistant(src, 1.0)
    # one chord cuts the corner, so compare arc positions rather than chord sums
    arcs = np.array([project_onto(src, q)[0] for q in r.points])
    assert arcs[-1] == pytest.approx(src.length, abs=1e-6)
    assert np.allclose(np.diff(arcs)[:-1], 1.0, atol=1e-9)


def test_motion_crosses_segment():
    line = Segment((5, -1), (5, 1))
    assert line.crossed_by((4.9, 0), (5.1, 0))
    assert line.crossed_by((4.9, 0), (5.0, 0))
    assert not line.crossed_by((5.0, 0), (5.1, 0))
    assert not line.crossed_by((4.0, 0), (4.5, 0))
    assert not motion_crosses((4.9, 2), (5.1, 2), (5, -1), (5, 1))
