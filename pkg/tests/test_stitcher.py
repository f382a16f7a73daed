import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dronemosaic import (
    ExcessiveDrift,
    MosaicPlan,
    NoOverlap,
    Rect,
    StitchDirection,
    StitchError,
    StitchParams,
    StitchReport,
    Translation2D,
    build_mosaic,
    compute_overlap,
    crop,
    make_scene,
    stitch_pair,
    stitch_sequence,
)
from dronemosaic.stitcher import compose_pair

W, H = 640, 480


@pytest.fixture(scope="module")
def field():
    return make_scene(1400, 1800, seed=21)


def grab(scene, x, y, w=W, h=H):
    return crop(scene, Rect(x, y, w, h))


def union_truth(scene, poses, w, h, axis):
    """Scene region spanned along ``axis`` and shared across it."""
    xs = [p[0] for p in poses]
    ys = [p[1] for p in poses]
    if axis == 0:
        x0, x1 = max(xs), min(xs) + w
        y0, y1 = min(ys), max(ys) + h
    else:
        x0, x1 = min(xs), max(xs) + w
        y0, y1 = max(ys), min(ys) + h
    return scene[y0:y1, x0:x1]


# -- compute_overlap -------------------------------------------------------


def test_overlap_strip_at_top_of_a():
    ov = compute_overlap((640, 480), (640, 480), Translation2D(0, -336), StitchDirection.BottomToTop)
    assert ov.rect_in_a == Rect(0, 0, 640, 144)
    assert ov.rect_in_b == Rect(0, 336, 640, 144)


def test_overlap_of_identical_frames_is_full():
    ov = compute_overlap((640, 480), (640, 480), Translation2D(0, 0), StitchDirection.BottomToTop)
    assert ov.rect_in_a == ov.rect_in_b == Rect(0, 0, 640, 480)


def test_touching_frames_do_not_overlap():
    with pytest.raises(NoOverlap):
        compute_overlap((640, 480), (640, 480), Translation2D(0, -480), StitchDirection.BottomToTop)


def test_overlap_rejects_wrong_side():
    with pytest.raises(NoOverlap):
        compute_overlap((640, 480), (640, 480), Translation2D(0, 100), StitchDirection.BottomToTop)


def test_overlap_rounds_half_away_from_zero():
    ov = compute_overlap((100, 100), (100, 100), Translation2D(0.5, -60.5), StitchDirection.BottomToTop)
    assert ov.rect_in_a == Rect(1, 0, 99, 39)


# -- stitch_pair -----------------------------------------------------------


def test_identical_copy_returns_frame(field):
    a = grab(field, 300, 600)
    out, record = stitch_pair(a, a.copy(), StitchDirection.BottomToTop)
    np.testing.assert_array_equal(out, a)
    assert record.offset == (0, 0)


def test_forty_percent_crops_give_union(field):
    a = grab(field, 200, 700)
    b = grab(field, 200, 700 - 288)
    out, record = stitch_pair(a, b, StitchDirection.BottomToTop)
    np.testing.assert_array_equal(out, field[412:1180, 200:840])
    assert record.offset == (0, -288)
    assert record.inliers >= record.matches * 0.5


def test_output_height_for_144_px_overlap(field):
    out, _ = stitch_pair(grab(field, 500, 900), grab(field, 500, 900 - 336), StitchDirection.BottomToTop)
    assert abs(out.shape[0] - 816) <= 1


def test_horizontal_pair(field):
    a = grab(field, 100, 300)
    b = grab(field, 100 + 448, 302)
    out, record = stitch_pair(a, b, StitchDirection.LeftToRight)
    assert record.offset == (448, 2)
    np.testing.assert_array_equal(out, field[302:780, 100:1188])


def test_perpendicular_drift_is_trimmed(field):
    a = grab(field, 400, 800)
    b = grab(field, 405, 800 - 300)
    out, record = stitch_pair(a, b, StitchDirection.BottomToTop)
    assert record.offset == (5, -300)
    np.testing.assert_array_equal(out, field[500:1280, 405:1040])


def test_excessive_drift(field):
    a = grab(field, 400, 800)
    b = grab(field, 420, 800 - 300)
    with pytest.raises(ExcessiveDrift):
        stitch_pair(a, b, StitchDirection.BottomToTop)
    with pytest.raises(ExcessiveDrift):
        stitch_pair(a, b, StitchDirection.BottomToTop, StitchParams(max_perpendicular_drift=19))
    out, _ = stitch_pair(a, b, StitchDirection.BottomToTop, StitchParams(max_perpendicular_drift=20))
    assert out.shape == (780, 620, 3)


@settings(max_examples=60, deadline=None)
@given(
    st.sampled_from(list(StitchDirection)),
    st.integers(1, 70),
    st.integers(-8, 8),
    st.integers(0, 3),
)
def test_compose_gives_ground_truth_union(direction, advance, perp, seed):
    """Any consistent known offset reproduces the scene exactly."""
    rng = np.random.default_rng(seed)
    scene = rng.integers(0, 256, (340, 340), dtype=np.uint8)
    w, h = 90, 80
    xa, ya = 120, 120
    if direction.axis == 0:
        step = advance if direction is StitchDirection.TopToBottom else -advance
        xb, yb = xa + perp, ya + step
    else:
        step = advance if direction is StitchDirection.LeftToRight else -advance
        xb, yb = xa + step, ya + perp
    a = grab(scene, xa, ya, w, h)
    b = grab(scene, xb, yb, w, h)
    out, a_shift, b_shift, _ = compose_pair(a, b, (xb - xa, yb - ya), direction)
    np.testing.assert_array_equal(out, union_truth(scene, [(xa, ya), (xb, yb)], w, h, direction.axis))
    # B survives whole along the stitch axis
    bx, by = b_shift
    if direction.axis == 0:
        np.testing.assert_array_equal(out[by : by + h], b[:, -bx : -bx + out.shape[1]])
    else:
        np.testing.assert_array_equal(out[:, bx : bx + w], b[-by : -by + out.shape[0]])


def test_feathering_only_touches_the_overlap(field):
    a = grab(field, 200, 700).astype(np.int16)
    a = np.clip(a + 40, 0, 255).astype(np.uint8)  # A brighter than B
    b = grab(field, 200, 700 - 336)
    params = StitchParams(feather=True)
    out, rec = stitch_pair(a, b, StitchDirection.BottomToTop, params, offset=(0, -336))
    hard, _ = stitch_pair(a, b, StitchDirection.BottomToTop, offset=(0, -336))
    assert out.shape == hard.shape
    np.testing.assert_array_equal(out[:336], b[:336])
    np.testing.assert_array_equal(out[480:], hard[480:])
    strip = out[336:480].astype(int)
    assert np.all(strip >= np.minimum(b[336:], a[:144])) and np.all(strip <= np.maximum(b[336:], a[:144]))


def test_feather_on_noiseless_frames_changes_nothing(field):
    a, b = grab(field, 200, 700), grab(field, 200, 400)
    soft, _ = stitch_pair(a, b, StitchDirection.BottomToTop, StitchParams(feather=True), offset=(0, -300))
    np.testing.assert_array_equal(soft, field[400:1180, 200:840])


# -- stitch_sequence -------------------------------------------------------


def column_frames(scene, x=300, y0=1200, n=4, spacing=336):
    poses = [(x, y0 - i * spacing) for i in range(n)]
    return [grab(scene, px, py) for px, py in poses], poses


def test_single_frame_sequence(field):
    f = grab(field, 10, 10)
    out, report = stitch_sequence([f], StitchDirection.BottomToTop)
    np.testing.assert_array_equal(out, f)
    assert report.pairs == [] and report.complete


def test_column_is_pixel_identical(field):
    frames, poses = column_frames(field)
    out, report = stitch_sequence(frames, StitchDirection.BottomToTop)
    np.testing.assert_array_equal(out, union_truth(field, poses, W, H, 0))
    # extent arithmetic: sum of extents minus overlaps
    assert out.shape[0] == 4 * H - 3 * 144
    assert [p.pair for p in report.pairs] == [(0, 1), (1, 2), (2, 3)]
    for p in report.pairs:
        assert p.offset == (0, -336)
        assert p.translation == pytest.approx((0.0, -336.0), abs=1e-6)


def test_last_frame_is_verbatim(field):
    frames, _ = column_frames(field)
    out, report = stitch_sequence(frames, StitchDirection.BottomToTop)
    ref, ax, ay = report.anchor
    assert ref == 3
    np.testing.assert_array_equal(grab(out, ax, ay), frames[-1])


def test_direction_symmetry(field):
    frames, _ = column_frames(field, n=3)
    up, _ = stitch_sequence(frames, StitchDirection.BottomToTop)
    down, _ = stitch_sequence(frames[::-1], StitchDirection.TopToBottom)
    np.testing.assert_array_equal(up, down)


def test_failure_names_pair_and_keeps_prefix(field):
    frames, poses = column_frames(field)
    frames[3] = np.full_like(frames[3], 90)  # shares nothing with frame 2
    with pytest.raises(StitchError) as info:
        stitch_sequence(frames, StitchDirection.BottomToTop)
    exc = info.value
    assert exc.pair == (2, 3)
    np.testing.assert_array_equal(exc.partial, union_truth(field, poses[:3], W, H, 0))
    assert len(exc.report.pairs) == 2
    assert exc.report.failures[0]["pair"] == [2, 3]


def test_replay_reproduces_offsets(field):
    frames, _ = column_frames(field, n=3)
    out, report = stitch_sequence(frames, StitchDirection.BottomToTop)
    again, replayed = stitch_sequence(frames, StitchDirection.BottomToTop, replay=report)
    np.testing.assert_array_equal(out, again)
    assert [p.offset for p in replayed.pairs] == [p.offset for p in report.pairs]


# -- build_mosaic ----------------------------------------------------------


def covered_region(scene, flight):
    xs = [p.x for p in flight.poses]
    ys = [p.y for p in flight.poses]
    return scene[min(ys) : max(ys) + H, min(xs) : max(xs) + W]


def test_one_by_one_plan(field):
    f = grab(field, 0, 0)
    out, report = build_mosaic(MosaicPlan(1, 1, frame_refs=[0]), [f])
    np.testing.assert_array_equal(out, f)
    assert report.pairs == []


def test_flat_grid_is_pixel_identical(scene, flat_flight, flat_mosaic):
    mosaic, report = flat_mosaic
    np.testing.assert_array_equal(mosaic, covered_region(scene, flat_flight))
    assert mosaic.shape == (1488, 1984, 3)
    assert len(report.pairs) == 15
    assert [p.stage for p in report.pairs].count("join") == 3


def test_grid_report_round_trips(flat_mosaic):
    _, report = flat_mosaic
    assert StitchReport.from_dict(report.to_dict()) == report


def test_grid_labels_use_cells(flat_mosaic):
    _, report = flat_mosaic
    assert report.pairs[0].pair == ("r3c0", "r2c0")
    assert report.pairs[-1].pair == ("column 2", "column 3")


def test_plan_validation():
    with pytest.raises(ValueError):
        MosaicPlan(2, 2, frame_refs=[0, 1, 2])
    with pytest.raises(ValueError):
        MosaicPlan(1, 1, leg_direction=StitchDirection.LeftToRight, frame_refs=[0])
    plan = MosaicPlan(2, 2, frame_refs=["a", "b", "c", "d"])
    assert plan.column_refs(0) == ["c", "a"]
    assert MosaicPlan.from_dict(plan.to_dict()) == plan


def test_excessive_column_drift_is_reported(field):
    frames, poses = column_frames(field, n=3)
    frames[2] = grab(field, poses[2][0] + 15, poses[2][1])
    with pytest.raises(ExcessiveDrift) as info:
        stitch_sequence(frames, StitchDirection.BottomToTop)
    assert info.value.pair == (1, 2)
