import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldvision.camera import ExtrinsicChain
from fieldvision.detectors.ball import (
    NBLC_MAGIC,
    BallClassifier,
    ClassifierFormatError,
    PatchShapeError,
    Stage,
    Stump,
    TrainingFailure,
    augment_positive,
    classify_ball,
    detect_ball_candidates,
    load_classifier,
    prepare_positives,
    reference_histograms,
    save_classifier,
    train_ball_classifier,
)
from fieldvision.detectors.boundary import detect_field_boundary, naive_field_boundary
from fieldvision.detectors.lines import (
    detect_centre_circle,
    detect_lines,
    line_edges,
    merge_segments,
    merge_segments_passes,
    verify_segment,
)
from fieldvision.detectors.pipeline import detect_frame
from fieldvision.detectors.posts import detect_goal_posts
from fieldvision.detectors.types import BallCandidate, DetectorConfig, NoFieldError
from fieldvision.geometry import Frame, FieldSpec, LineSegment2D, Pose2D, field_to_ego
from fieldvision.imgproc.color import GREEN, WHITE, classify_colors, rgb_to_hsv
from fieldvision.imgproc.hog import HogLayout
from fieldvision.imgproc.polygon import is_simple_polygon
from fieldvision.synth import LINE, Occluder, SceneConfig, render
from fieldvision.harness.metrics import iou

CFG = DetectorConfig()


def scene(pose, tilt_deg, **kw):
    return SceneConfig(pose=Pose2D(*pose), chain=ExtrinsicChain(neck_tilt=math.radians(tilt_deg)), supersample=1, **kw)


def shot(sc, cam, spec):
    img, gt = render(sc, cam, spec)
    hsv = rgb_to_hsv(img)
    return img, gt, hsv, classify_colors(hsv, CFG.colors)


def seg(a, b, frame=Frame.PIXEL):
    return LineSegment2D(tuple(map(float, a)), tuple(map(float, b)), frame)


# --- field boundary ----------------------------------------------------------------------


def test_all_green_boundary_is_image_rectangle(cam):
    labels = np.full((cam.height, cam.width), GREEN, np.uint8)
    poly = detect_field_boundary(labels, cam).polygon
    border = np.array(
        [(x, 0) for x in range(cam.width)]
        + [(x, cam.height - 1) for x in range(cam.width)]
        + [(0, y) for y in range(cam.height)]
        + [(cam.width - 1, y) for y in range(cam.height)],
        float,
    )
    closed = np.vstack([poly, poly[:1]])
    a, b = closed[:-1], closed[1:]
    d = np.full(len(border), np.inf)
    for p, q in zip(a, b):
        ab = q - p
        t = np.clip((border - p) @ ab / (ab @ ab), 0, 1)
        d = np.minimum(d, np.hypot(*(p + t[:, None] * ab - border).T))
    assert d.max() <= 2.0


def test_no_green_raises(cam):
    with pytest.raises(NoFieldError):
        detect_field_boundary(np.zeros((cam.height, cam.width), np.uint8), cam)


@pytest.mark.parametrize("pose,tilt", [((3.8, 2.0, 0.6), 20), ((-4.2, -2.5, -2.5), 15), ((0.0, 3.3, 1.6), 25)])
def test_boundary_against_field_mask(cam, spec, pose, tilt):
    _, gt, _, labels = shot(scene(pose, tilt), cam, spec)
    assert (~gt.field_mask).sum() > 1000  # background in view
    fb = detect_field_boundary(labels, cam)
    m = fb.mask(labels.shape)
    assert is_simple_polygon(fb.polygon)
    assert iou(m, gt.field_mask) >= 0.97
    assert (m & gt.field_mask).sum() >= 0.99 * gt.field_mask.sum()
    assert (~m & ~gt.field_mask).sum() >= 0.99 * (~gt.field_mask).sum() - 0.01 * m.size
    assert iou(m, gt.field_mask) > iou(naive_field_boundary(labels, cam).mask(labels.shape), gt.field_mask)


# --- ball stage one --------------------------------------------------------------------------


@pytest.fixture(scope="module")
def ball_frame(cam, spec):
    sc = scene((0, 0, 0), 30, ball=(2.0, 0.3))
    img, gt, hsv, labels = shot(sc, cam, spec)
    lm = gt.landmark("ball")[0]
    ref = reference_histograms([(hsv, lm["pixel"], lm["radius_px"])])
    return sc, hsv, labels, lm, ref


def test_ball_at_two_metres_single_candidate(cam, ball_frame):
    sc, hsv, labels, lm, ref = ball_frame
    cands = detect_ball_candidates(hsv, labels, detect_field_boundary(labels, cam), ref, cam, sc.chain, CFG)
    assert len(cands) == 1
    assert math.dist(cands[0].center, lm["pixel"]) <= 3.0


def test_zero_histogram_threshold_rejects_all(cam, ball_frame):
    sc, hsv, labels, _, ref = ball_frame
    cfg = DetectorConfig(ball_histogram_threshold=0.0)
    assert detect_ball_candidates(hsv, labels, detect_field_boundary(labels, cam), ref, cam, sc.chain, cfg) == []


def test_straight_line_is_not_a_ball(cam, spec, ball_frame):
    ref = ball_frame[4]
    sc = scene((-1.5, 1.0, 0), 35)
    _, gt, hsv, labels = shot(sc, cam, spec)
    assert (gt.mask == LINE).sum() > 500
    assert detect_ball_candidates(hsv, labels, detect_field_boundary(labels, cam), ref, cam, sc.chain, CFG) == []


# --- augmentation, cascade, serialization ---------------------------------------------------------


def test_augmentation_ten_with_identity_first(rng):
    p = rng.integers(0, 256, (32, 32)).astype(np.uint8)
    out = augment_positive(p)
    assert len(out) == 10
    np.testing.assert_array_equal(out[0], p)
    assert all(o.shape == p.shape for o in out)


def test_augmentation_needs_square():
    with pytest.raises(PatchShapeError):
        augment_positive(np.zeros((32, 30), np.uint8))


def test_one_positive_presents_ten(rng):
    assert len(prepare_positives([rng.integers(0, 256, (32, 32)).astype(np.uint8)])) == 10


def _disk_patches(rng, n, ball=True):
    yy, xx = np.mgrid[0:32, 0:32]
    out = []
    for _ in range(n):
        p = rng.normal(90, 12, (32, 32))
        if ball:
            c = 16 + rng.normal(0, 1, 2)
            d = (xx - c[0]) ** 2 + (yy - c[1]) ** 2 <= (11 + rng.normal()) ** 2
            p[d] = 230
            p[d & (np.abs(xx - c[0] + yy - c[1]) < 3)] = 40
        else:
            p[:, 12 + int(rng.integers(0, 6)) : 20] = 230  # straight white bar
        out.append(np.clip(p, 0, 255).astype(np.uint8))
    return out


def test_train_and_round_trip(rng):
    pos, neg = _disk_patches(rng, 30), _disk_patches(rng, 300, ball=False)
    model, rep = train_ball_classifier(pos, neg, stages=2, seed=0)
    assert rep.n_positives == 300
    ok, _ = model.evaluate(model.features(pos))
    assert ok.mean() >= 0.95
    ok_neg, _ = model.evaluate(model.features(_disk_patches(rng, 100, ball=False)))
    assert ok_neg.mean() <= 0.05
    back = load_classifier(save_classifier(model))
    assert back == model
    X = model.features(pos + neg)
    np.testing.assert_array_equal(back.evaluate(X)[1], model.evaluate(X)[1])


def test_identical_sets_fail_training(rng):
    pos = _disk_patches(rng, 30)
    with pytest.raises(TrainingFailure):
        train_ball_classifier(pos * 10, prepare_positives(pos), stages=2)


def test_constant_patch_rejected():
    model = BallClassifier(HogLayout(), (Stage((Stump(0, 0.0, 1.0, 1.0),), -10.0),))
    cand = BallCandidate((0, 0), 5, 1, 0, np.full((32, 32), 128, np.uint8))
    assert classify_ball(cand, model)[0] is False


def test_nblc_format_errors():
    model = BallClassifier(HogLayout(), (Stage((Stump(3, 0.5, -1.0, 0.7),), 0.1),))
    data = save_classifier(model)
    assert data[:4] == NBLC_MAGIC
    with pytest.raises(ClassifierFormatError):
        load_classifier(b"XXXX" + data[4:])
    with pytest.raises(ClassifierFormatError):
        load_classifier(data[:4] + (99).to_bytes(4, "little") + data[8:])
    with pytest.raises(ClassifierFormatError):
        load_classifier(data[:-3])
    with pytest.raises(ClassifierFormatError):
        load_classifier(data + b"\0")


# --- lines ---------------------------------------------------------------------------------


def _nearest_line_error(s, truth):
    best = np.inf
    for a, b in truth:
        a, b = np.asarray(a), np.asarray(b)
        ab = b - a
        e = []
        for p in (s.p0, s.p1):
            t = np.clip((np.asarray(p) - a) @ ab / (ab @ ab), 0, 1)
            e.append(np.hypot(*(a + t * ab - p)))
        best = min(best, max(e))
    return best


def test_lines_toward_goal(cam, spec):
    sc = scene((-2.0, 0.0, 0.0), 25)
    img, gt, _, _ = shot(sc, cam, spec)
    det = detect_frame(img, cam, sc.chain, spec, cfg=CFG)
    truth = [lm["ego"] for lm in gt.landmark("line")]
    halfway = field_to_ego(sc.pose, (0, 0))
    found_halfway = [s for s in det.lines if abs(s.p0[0] - halfway[0]) < 0.15 and abs(s.p1[0] - halfway[0]) < 0.15]
    assert found_halfway and found_halfway[0].length > 3.0
    near = [s for s in det.lines if max(np.hypot(*s.p0), np.hypot(*s.p1)) <= 4.5]
    assert near and all(_nearest_line_error(s, truth) <= 0.15 for s in near)


def test_white_robot_body_gives_no_lines(cam):
    big = FieldSpec(length=30, width=20, goal_post_positions=((15, 1.3), (15, -1.3), (-15, 1.3), (-15, -1.3)))
    body = Occluder((-5.6, 5.4), (0.35, 0.25, 0.6), (235, 235, 235))
    sc = scene((-7.0, 5.0, 0.3), 45, occluders=(body,))
    img, gt, _, _ = shot(sc, cam, big)
    assert (gt.mask == 4).sum() > 5000 and (gt.mask == LINE).sum() < 100
    assert detect_frame(img, cam, sc.chain, big, cfg=CFG).lines == []


def test_empty_green_frame(cam, chain30):
    img = np.zeros((cam.height, cam.width, 3), np.uint8)
    img[...] = (50, 135, 55)
    assert detect_frame(img, cam, chain30).lines == []


def _white_bar_labels(cam, x0=300, x1=310):
    labels = np.full((cam.height, cam.width), GREEN, np.uint8)
    labels[:, x0:x1] = WHITE
    return labels


def test_verify_ideal_rendered_line(cam, spec):
    sc = scene((-2.0, 0.0, 0.0), 25)
    _, _, hsv, labels = shot(sc, cam, spec)
    fb = detect_field_boundary(labels, cam)
    segs, rep = detect_lines(hsv, labels, fb, cam, sc.chain, CFG)
    assert segs
    edges = line_edges(hsv, fb, CFG)
    counts = [verify_segment(s, labels, edges, cam, sc.chain, CFG) for s in segs]
    assert all(v.passed for v in counts)  # replay: everything returned verifies
    assert max((v.white, v.green, v.edge) for v in counts)[:2] == (10, 10)
    assert max(v.edge for v in counts) >= 9


def test_verify_white_blob_has_no_green(cam, chain30):
    labels = np.full((cam.height, cam.width), WHITE, np.uint8)
    edges = np.zeros(labels.shape, bool)
    v = verify_segment(seg((200, 300), (400, 300)), labels, edges, cam, chain30, CFG)
    assert v.green == 0 and not v.passed


def test_merge_collinear_gap():
    out = merge_segments([seg((0, 0), (50, 0)), seg((55, 0), (100, 0))], math.radians(5), 3, 10)
    assert len(out) == 1
    np.testing.assert_allclose(sorted([out[0].p0[0], out[0].p1[0]]), (0, 100), atol=1e-9)


def test_merge_perpendicular_unchanged():
    segs = [seg((0, 0), (50, 0)), seg((60, -20), (60, 30))]
    assert len(merge_segments(segs, math.radians(5), 3, 10)) == 2


def test_merge_three_degree_pair():
    a = seg((0, 0), (80, 0))
    t = math.radians(3)
    b = seg((20, 1), (20 + 80 * math.cos(t), 1 + 80 * math.sin(t)))
    out, passes = merge_segments_passes([a, b], math.radians(5), 6, 10)
    assert len(out) == 1 and passes <= 2


seg_st = st.tuples(st.floats(0, 200), st.floats(0, 200), st.floats(0, 200), st.floats(0, 200)).filter(
    lambda t: math.hypot(t[2] - t[0], t[3] - t[1]) > 5
)


@settings(max_examples=60, deadline=None)
@given(st.lists(seg_st, min_size=1, max_size=12))
def test_merge_idempotent(raw):
    segs = [seg(r[:2], r[2:]) for r in raw]
    out = merge_segments(segs, math.radians(5), 3, 20)
    assert merge_segments(out, math.radians(5), 3, 20) == out


# --- centre circle and posts ---------------------------------------------------------------


def test_centre_circle_at_two_metres(cam, spec):
    sc = scene((-2.0, 0.3, 0.1), 25)
    img, _, _, _ = shot(sc, cam, spec)
    det = detect_frame(img, cam, sc.chain, spec, cfg=CFG)
    truth = field_to_ego(sc.pose, (0, 0))
    assert det.circle is not None and math.dist(det.circle, truth) <= 0.2


def _circle_chords(center, deg_from, deg_to, n, r=0.75):
    t = np.radians(np.linspace(deg_from, deg_to, n + 1))
    pts = np.c_[center[0] + r * np.cos(t), center[1] + r * np.sin(t)]
    return [seg(p, q, Frame.EGOCENTRIC) for p, q in zip(pts, pts[1:])]


def test_circle_absent_with_long_lines_only(spec):
    lines = [seg((1, -3), (1, 3), Frame.EGOCENTRIC), seg((0, 2), (5, 2), Frame.EGOCENTRIC)]
    assert detect_centre_circle(lines, spec) is None


def test_circle_arc_coverage_rule(spec):
    assert detect_centre_circle(_circle_chords((2, 0), 90, 270, 8), spec) is not None
    assert detect_centre_circle(_circle_chords((2, 0), 135, 225, 6), spec) is None


def test_goal_posts_at_three_metres(cam, spec):
    sc = scene((1.5, 0.0, 0.0), 15)
    _, _, _, labels = shot(sc, cam, spec)
    posts = detect_goal_posts(labels, detect_field_boundary(labels, cam), cam, sc.chain, CFG)
    truth = [field_to_ego(sc.pose, p) for p in spec.goal_post_positions[:2]]
    assert len(posts) == 2
    for t in truth:
        assert min(math.dist(t, p) for p in posts) <= 0.3


def test_no_goal_no_posts(cam, spec):
    sc = scene((0.0, 0.0, math.pi / 2), 25)
    _, _, _, labels = shot(sc, cam, spec)
    assert detect_goal_posts(labels, detect_field_boundary(labels, cam), cam, sc.chain, CFG) == []


def test_ball_on_boundary_is_not_a_post(cam, spec):
    sc = scene((0.0, 1.5, math.pi / 2), 20, ball=(0.0, 3.2))
    _, gt, _, labels = shot(sc, cam, spec)
    assert gt.landmark("ball")[0]["pixels"] > 50
    posts = detect_goal_posts(labels, detect_field_boundary(labels, cam), cam, sc.chain, CFG)
    ball_ego = field_to_ego(sc.pose, (0.0, 3.2))
    assert all(math.dist(p, ball_ego) > 0.5 for p in posts)


def test_detect_frame_deterministic(cam, spec):
    sc = scene((-1.0, -0.5, 0.4), 22, ball=(1.0, 0.0))
    img, _ = render(sc, cam, spec)
    a = detect_frame(img, cam, sc.chain, spec, cfg=CFG).to_record()
    b = detect_frame(img.copy(), cam, sc.chain, spec, cfg=CFG).to_record()
    assert a == b
