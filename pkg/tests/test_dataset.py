import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from drivebench.dataset import (N_CLASSES, SPEED_CLASSES, DataError, FrameRecord, TwoHotLabel,
                                change_mask, class_counts, class_weights, constant_cruise_frames,
                                decode_two_hot, encode_two_hot, filter_frames, read_frames,
                                retention_draw, write_frames)


def test_encode_three_metres_per_second():
    assert np.array_equal(encode_two_hot(3.0).weights, [0.25, 0.75, 0, 0, 0, 0, 0, 0])
    assert decode_two_hot([0.25, 0.75, 0, 0, 0, 0, 0, 0]) == 3.0


def test_exact_class_is_one_hot():
    w = encode_two_hot(8.0).weights
    assert w[2] == 1.0 and w.sum() == 1.0


def test_interpolation_formula():
    w = encode_two_hot(12.0).weights
    assert w[3] == pytest.approx((13.89 - 12) / 3.89, abs=1e-12)
    assert w[4] == pytest.approx((12 - 10) / 3.89, abs=1e-12)


def test_clamping():
    assert encode_two_hot(-3.0).weights[0] == 1.0
    assert encode_two_hot(50.0).weights[-1] == 1.0
    assert decode_two_hot(np.eye(N_CLASSES)[0]) == 0.0


@given(st.floats(allow_nan=False))
def test_encode_always_valid(v):
    lab = encode_two_hot(v)
    assert isinstance(lab, TwoHotLabel)
    assert abs(lab.weights.sum() - 1) <= 1e-12


def test_round_trip_grid():
    for v in np.linspace(0, 20, 2001):
        assert decode_two_hot(encode_two_hot(v)) == pytest.approx(v, abs=1e-9)


@given(st.integers(0, N_CLASSES - 2), st.floats(0, 1))
def test_encode_decode_on_labels(i, w):
    weights = np.zeros(N_CLASSES)
    weights[i], weights[i + 1] = 1 - w, w
    back = encode_two_hot(decode_two_hot(weights)).weights
    assert np.allclose(back, weights, atol=1e-9)


@pytest.mark.parametrize("bad", [
    np.ones(N_CLASSES) / N_CLASSES,  # too many nonzero
    [0.5, 0, 0.5, 0, 0, 0, 0, 0],  # not adjacent
    [1.2, -0.2, 0, 0, 0, 0, 0, 0],  # negative
    [0.5, 0.4, 0, 0, 0, 0, 0, 0],  # sum != 1
    [1.0, 0.0],  # wrong length
])
def test_label_invariants(bad):
    with pytest.raises(DataError):
        TwoHotLabel(bad)


def test_class_weights_uniform_and_skewed():
    assert np.allclose(class_weights([5] * 8).weights, 1.0)
    counts = np.array([2, 1, 1, 1, 1, 1, 1, 1])
    w = class_weights(counts).weights
    assert w[0] < w[1]
    assert np.all(w[1:] == w[1])
    assert (counts * w).sum() == pytest.approx(counts.sum(), abs=1e-12)


def test_most_frequent_class_gets_smallest_weight():
    # the published vector has its minimum at the most frequent class 0
    counts = np.array([900, 200, 380, 320, 60, 55, 67, 110])
    w = class_weights(counts).weights
    assert np.argmin(w) == np.argmax(counts) == 0
    assert np.array_equal(np.argsort(w), np.argsort(-counts))


@given(st.lists(st.integers(1, 10_000), min_size=8, max_size=8), st.integers(1, 50))
def test_class_weights_scale_invariant(counts, k):
    a = class_weights(counts).weights
    b = class_weights(np.array(counts) * k).weights
    assert np.allclose(a, b, rtol=1e-12)


def test_class_weights_errors():
    with pytest.raises(DataError):
        class_weights([0, 1, 1, 1, 1, 1, 1, 1])
    with pytest.raises(DataError):
        class_weights([1, 1, 1])
    with pytest.raises(DataError):
        class_weights([1.5, 1, 1, 1, 1, 1, 1, 1])


def test_class_counts_use_dominant_class():
    assert class_counts([0.0, 3.0, 3.0, 20.0]).tolist() == [1, 2, 0, 0, 0, 0, 0, 1]


# ---------------------------------------------------------------- frames

def test_frame_log_round_trip(tmp_path):
    frames = constant_cruise_frames(5)
    frames[2].events = [{"type": "CV", "frame": 2}]
    p = tmp_path / "log.jsonl"
    write_frames(p, frames)
    back = read_frames(p)
    assert [f.to_dict() for f in back] == [f.to_dict() for f in frames]
    assert json.loads(p.read_text().splitlines()[0]) == {"format": "drivebench-frames", "version": 1}


def test_frame_log_errors_name_line(tmp_path):
    p = tmp_path / "bad.jsonl"
    write_frames(p, constant_cruise_frames(3))
    lines = p.read_text().splitlines()
    lines[2] = '{"route_id": "x"}'
    p.write_text("\n".join(lines) + "\n")
    with pytest.raises(DataError, match=r"bad\.jsonl:3:"):
        read_frames(p)
    p.write_text("not json\n")
    with pytest.raises(DataError, match=":1:"):
        read_frames(p)


def test_frame_record_invariants():
    cps = np.zeros((10, 2))
    with pytest.raises(DataError):
        FrameRecord("r", 0, 0.0, 0, 0, 0, 0, 25.0, cps)
    with pytest.raises(DataError):
        FrameRecord("r", 0, 0.0, 0, 0, 0, 0, 5.0, np.zeros((3, 2)))


# ---------------------------------------------------------------- filter

def test_empty_log():
    kept, stats = filter_frames([])
    assert kept == [] and stats.n_frames == 0 and stats.kept_fraction == 0.0


def test_constant_cruise_binomial():
    n, p = 1000, 0.14
    frames = constant_cruise_frames(n)
    for seed in range(5):
        kept, stats = filter_frames(frames, seed=seed)
        assert stats.n_change == 0
        mean, sd = p * (n - 1), math.sqrt((n - 1) * p * (1 - p))
        assert abs(stats.n_kept - 1 - mean) <= 3 * sd
        assert kept[0].frame_index == 0


def test_alternating_target_keeps_everything():
    frames = constant_cruise_frames(200)
    for f in frames:
        f.target_speed_label = 5.0 * (f.frame_index % 2)
    kept, stats = filter_frames(frames)
    assert len(kept) == 200 and stats.n_change == 199


def test_bearing_change_detected_with_wrap():
    frames = constant_cruise_frames(3)
    # a checkpoint straight behind flips between +pi and -pi: no real change
    frames[0].checkpoints[9] = (-1.0, 1e-9)
    frames[1].checkpoints[9] = (-1.0, -1e-9)
    frames[2].checkpoints[9] = (-1.0, math.tan(math.radians(0.6)))
    assert change_mask(frames).tolist() == [False, False, True]


@given(st.lists(st.floats(0, 20), min_size=2, max_size=60), st.integers(0, 2**32), st.integers(0, 2**32),
       st.floats(0, 1))
def test_change_set_independent_of_seed(speeds, s1, s2, keep):
    frames = constant_cruise_frames(len(speeds))
    for f, v in zip(frames, speeds):
        f.target_speed_label = v
    k1, st1 = filter_frames(frames, seed=s1, keep_frac=keep)
    k2, st2 = filter_frames(frames, seed=s2, keep_frac=0.14)
    assert st1.n_change == st2.n_change
    mask = change_mask(frames)
    ids1 = {f.frame_index for f in k1}
    assert all(f.frame_index in ids1 for f, m in zip(frames, mask) if m)
    # drops in target speed are always kept
    for a, b in zip(frames, frames[1:]):
        if a.target_speed_label - b.target_speed_label > 0.1:
            assert b.frame_index in ids1
    assert filter_frames(frames, seed=s1, keep_frac=keep)[0] == k1


def test_retention_is_order_independent():
    a = constant_cruise_frames(300, route_id="a")
    b = constant_cruise_frames(300, route_id="b")
    ka, _ = filter_frames(a + b, seed=4)
    kb, _ = filter_frames(b + a, seed=4)
    key = lambda f: (f.route_id, f.frame_index)
    assert sorted(map(key, ka)) == sorted(map(key, kb))
    assert 0.0 <= retention_draw(4, "a", 7) < 1.0


def test_filter_input_errors():
    a = constant_cruise_frames(3, route_id="a")
    b = constant_cruise_frames(3, route_id="b")
    with pytest.raises(DataError, match="contiguous"):
        filter_frames(a + b + a)
    with pytest.raises(DataError, match="increasing"):
        filter_frames(a[::-1])
    with pytest.raises(DataError):
        filter_frames(a, keep_frac=1.5)
