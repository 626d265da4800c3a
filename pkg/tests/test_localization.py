import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fieldvision.detectors.types import Detections
from fieldvision.geometry import FieldSpec, Frame, LineSegment2D, Pose2D, normalize_angle
from fieldvision.localization import (
    LineClass,
    LocConfig,
    LocState,
    OdometryDelta,
    StepReport,
    append_trace,
    classify_lines,
    localize_step,
    predict,
    trace_record,
    update_theta,
    update_xy,
)
from fieldvision.synth import dead_reckon, ideal_detections

DEG = math.pi / 180
SPEC = FieldSpec()


def ego(a, b):
    return LineSegment2D(tuple(map(float, a)), tuple(map(float, b)), Frame.EGOCENTRIC)


def line_at(angle, length=2.0, offset=(1.0, 0.0)):
    d = np.array([math.cos(angle), math.sin(angle)]) * length / 2
    c = np.asarray(offset)
    return ego(c - d, c + d)


def err(p: Pose2D, q: Pose2D) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


# --- predict ------------------------------------------------------------------------


def test_predict_forward_step_rotated():
    s = predict(LocState(Pose2D(0, 0, math.pi / 2)), OdometryDelta(0.1, 0, 0))
    assert (s.pose.x, s.pose.y, s.pose.theta) == pytest.approx((0, 0.1, math.pi / 2), abs=1e-12)


def test_predict_zero_delta_decays():
    s0 = LocState(Pose2D(1, 2, 0.3), confidence=(1, 1, 1))
    s = predict(s0, OdometryDelta())
    assert s.pose == s0.pose and s.confidence == (0.99, 0.99, 0.99) and s.age == (1, 1, 1)


def test_predict_rejects_out_of_bounds():
    rep = StepReport()
    s0 = LocState(Pose2D(1, 2, 0.3))
    assert predict(s0, OdometryDelta(0.5, 0, 0), report=rep) is s0
    assert rep.flags == ["odometry_rejected"]


def test_predict_vs_matrix_oracle(rng):
    def H(x, y, t):
        return np.array([[math.cos(t), -math.sin(t), x], [math.sin(t), math.cos(t), y], [0, 0, 1]])

    s = LocState(Pose2D(0.3, -0.2, 0.4))
    M = H(0.3, -0.2, 0.4)
    for _ in range(100):
        d = rng.uniform((-0.1, -0.1, -0.2), (0.1, 0.1, 0.2))
        s = predict(s, OdometryDelta(*d))
        M = M @ H(*d)
    assert s.pose.x == pytest.approx(M[0, 2], abs=1e-9) and s.pose.y == pytest.approx(M[1, 2], abs=1e-9)
    assert normalize_angle(s.pose.theta - math.atan2(M[1, 0], M[0, 0])) == pytest.approx(0, abs=1e-9)


# --- heading ---------------------------------------------------------------------------


def test_theta_exact_magnetometer_no_update():
    s0 = LocState(Pose2D(0, 0, 0.2))
    rep = StepReport()
    s = update_theta(s0, 0.2, [line_at(-0.2), line_at(math.pi / 2 - 0.2)], report=rep)
    assert s.theta_correction == pytest.approx(0, abs=1e-12) and rep.theta_residual == pytest.approx(0, abs=1e-12)


def test_theta_thirty_degree_bias():
    true = 10 * DEG
    lines = [line_at(-true, 3.0)]  # field x-axis seen from heading 10 degrees
    s = LocState(Pose2D(0, 0, 0))
    rep = StepReport()
    s = update_theta(s, 40 * DEG, lines, report=rep)
    assert rep.theta_residual == pytest.approx(-30 * DEG, abs=1e-9)
    assert s.theta_correction == pytest.approx(-6 * DEG, abs=1e-9)
    for _ in range(29):
        s = update_theta(s, 40 * DEG, lines)
    assert abs(normalize_angle(s.pose.theta - true)) < 2 * DEG


def test_theta_gate_at_45():
    s0 = LocState(Pose2D())
    s = update_theta(s0, 0.0, [line_at(45 * DEG)])
    assert s.theta_correction == 0.0 and s.confidence == s0.confidence


def test_theta_without_magnetometer_corrects_heading():
    s = update_theta(LocState(Pose2D(0, 0, 5 * DEG)), None, [line_at(0.0)])
    assert s.pose.theta == pytest.approx(4 * DEG) and s.theta_correction == 0.0


# --- classification --------------------------------------------------------------------


def test_classify_examples():
    assert classify_lines(0.0, [line_at(0.0)]) == [LineClass.HORIZONTAL]
    assert classify_lines(math.pi / 2, [line_at(0.0)]) == [LineClass.VERTICAL]
    assert classify_lines(0.0, [line_at(30 * DEG)]) == [LineClass.REJECTED]
    assert classify_lines(0.0, [line_at(-60 * DEG)]) == [LineClass.REJECTED]


@given(st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_classify_rotation_consistent(theta, a):
    """Classification only depends on the field-frame direction."""
    c1 = classify_lines(theta, [line_at(a)])
    c2 = classify_lines(theta + math.pi / 2, [line_at(a)])
    swap = {LineClass.HORIZONTAL: LineClass.VERTICAL, LineClass.VERTICAL: LineClass.HORIZONTAL}
    phi = abs(normalize_angle(a + theta)) % (math.pi / 2)
    if abs(phi - 20 * DEG) > 1e-6 and abs(phi - 70 * DEG) > 1e-6:
        assert c2 == [swap.get(c1[0], c1[0])]


# --- position ---------------------------------------------------------------------------


def test_circle_fixes_both_axes():
    s0 = LocState(Pose2D(3.0, 2.0, 0.0))
    rep = StepReport()
    update_xy(s0, Detections(None, [], circle=(2.0, 0.0)), SPEC, report=rep)
    assert rep.innovation == pytest.approx((-2.0 - 3.0, 0.0 - 2.0))


def test_sideline_association():
    s0 = LocState(Pose2D(0.0, 1.0, 0.0))
    rep = StepReport()
    s = update_xy(s0, Detections(None, [ego((0.0, 1.2), (3.0, 1.2))]), SPEC, report=rep)
    assert rep.innovation[1] == pytest.approx(1.8 - 1.0)
    assert s.pose.y == pytest.approx(1.0 + 0.3 * 0.8) and s.confidence[1] == 1.0


def test_conflict_skips_update():
    s0 = LocState(Pose2D(0.0, 0.0, 0.0))
    rep = StepReport()
    # circle says x = -2, a goal post says x = +2.5: contradictory
    det = Detections(None, [], circle=(2.0, 0.0), goal_posts=[(2.0, 1.3)])
    s = update_xy(s0, det, SPEC, report=rep)
    assert s is s0 and "xy_conflict" in rep.flags


def test_innovation_clamped():
    rep = StepReport()
    s = update_xy(LocState(Pose2D(3.0, 2.0, 0.0)), Detections(None, [], circle=(2.0, 0.0)), SPEC, report=rep)
    assert math.hypot(s.pose.x - 3.0, s.pose.y - 2.0) == pytest.approx(0.5)
    assert "xy_clamped" in rep.flags


def test_post_pair_fixes_pose():
    truth = Pose2D(2.0, -0.5, 0.1)
    det = ideal_detections(truth, SPEC)
    assert len(det.goal_posts) == 2
    s = LocState(Pose2D(2.3, -0.2, 0.1))
    rep = StepReport()
    update_xy(s, Detections(None, [], goal_posts=det.goal_posts), SPEC, report=rep)
    assert rep.innovation == pytest.approx((-0.3, -0.3), abs=1e-9)


def run(truth_poses, start, spec=SPEC, mag=None, detections=True, cfg=LocConfig()):
    s = LocState(start)
    out = []
    for i, t in enumerate(truth_poses):
        odo = OdometryDelta(*t.relative_to(truth_poses[i - 1])) if i else OdometryDelta()
        det = ideal_detections(t, spec) if detections else Detections(None, [])
        m = None if mag is None else normalize_angle(t.theta + mag)
        s, rep = localize_step(s, odo, det, m, spec, cfg)
        out.append((s, rep))
    return out


def test_kidnap_recovery_within_15_frames():
    truth = [Pose2D(-1.0, 0.5, 0.2)] * 40
    res = run(truth, Pose2D(-1.0, 3.5, 0.2))  # estimate 3 m off in y
    errs = [err(s.pose, truth[0]) for s, _ in res]
    first = next(i for i, e in enumerate(errs) if e < 0.3)
    assert 6 <= first + 1 <= 15


def test_stationary_converges_monotonically():
    truth = [Pose2D(-1.5, 1.0, 0.3)] * 100
    res = run(truth, Pose2D(-0.5, 0.2, 0.3))
    errs = np.array([err(s.pose, truth[0]) for s, _ in res])
    assert np.all(np.diff(errs[10:]) <= 1e-12) and errs[-1] < 0.15


def test_no_detections_is_dead_reckoning(rng):
    odo = [tuple(rng.uniform((-0.05, -0.02, -0.05), (0.1, 0.02, 0.05))) for _ in range(200)]
    s = LocState(Pose2D(0.0, 0.0, 0.0), confidence=(1, 1, 1))
    for d in odo:
        s, _ = localize_step(s, OdometryDelta(*d), Detections(None, []), None, FieldSpec(length=400, width=300))
    want = dead_reckon(Pose2D(), odo)
    assert err(s.pose, want) < 1e-12 and s.pose.theta == pytest.approx(want.theta, abs=1e-12)
    assert max(s.confidence) < 0.2


def test_aliasing_never_jumps():
    truth = Pose2D(0.6, 0.0, math.pi / 2)  # only the halfway line in a tight view
    det = ideal_detections(truth, SPEC, max_range=1.5, half_fov=30 * DEG)
    det = Detections(None, det.lines)
    s = LocState(Pose2D(-0.6, 0.0, math.pi / 2))
    prev = s.pose
    for _ in range(50):
        s, _ = localize_step(s, OdometryDelta(), det, None, SPEC)
        assert err(s.pose, prev) <= 0.5 + 1e-12
        prev = s.pose


@settings(max_examples=15, deadline=None)
@given(st.floats(-30, 30), st.integers(0, 10_000))
def test_bias_invariance(bias_deg, seed):
    r = np.random.default_rng(seed)
    truth = [Pose2D(r.uniform(-3, 3), r.uniform(-2, 2), r.uniform(-math.pi, math.pi))] * 60
    res = run(truth, truth[0], mag=bias_deg * DEG)
    assert abs(normalize_angle(res[-1][0].pose.theta - truth[0].theta)) <= 2 * DEG


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_step_bounds_and_field_containment(seed):
    r = np.random.default_rng(seed)
    truth = [Pose2D(r.uniform(-4, 4), r.uniform(-2.8, 2.8), r.uniform(-math.pi, math.pi))]
    for _ in range(40):
        truth.append(truth[-1].compose(r.uniform(0, 0.08), r.uniform(-0.02, 0.02), r.uniform(-0.15, 0.15)))
    start = Pose2D(
        float(np.clip(truth[0].x + r.uniform(-3, 3), -5.5, 5.5)),
        float(np.clip(truth[0].y + r.uniform(-3, 3), -4.0, 4.0)),
        truth[0].theta + r.uniform(-0.3, 0.3),
    )
    res = run(truth, start, mag=r.uniform(-0.5, 0.5))
    cfg = LocConfig()
    prev = LocState(start).pose
    for i, (s, _) in enumerate(res):
        odo = truth[i].relative_to(truth[i - 1]) if i else (0, 0, 0)
        assert err(s.pose, prev) <= math.hypot(odo[0], odo[1]) + cfg.xy_clamp + 1e-9
        assert abs(s.pose.x) <= SPEC.length / 2 + cfg.field_margin
        assert abs(s.pose.y) <= SPEC.width / 2 + cfg.field_margin
        prev = s.pose


def test_fixpoint_is_truth():
    truth = [Pose2D(-2.0, -1.0, 0.7)] * 300
    res = run(truth, Pose2D(-1.0, -0.2, 0.7))
    assert err(res[-1][0].pose, truth[0]) < 1e-3


def test_trace_line():
    s, rep = localize_step(LocState(Pose2D(0.1, 0.2, 0.3)), OdometryDelta(), Detections(None, []), None)
    buf = io.StringIO()
    append_trace(buf, trace_record(7, s, rep))
    rec = json.loads(buf.getvalue())
    assert buf.getvalue().count("\n") == 1
    assert rec["frame"] == 7 and rec["pose"] == pytest.approx([0.1, 0.2, 0.3]) and rec["flags"] == []
    assert set(rec) == {"frame", "pose", "theta_correction", "confidence", "age", "flags"}
