import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import ndimage

from fieldvision.camera import ExtrinsicChain, camera_pose
from fieldvision.geometry import Pose2D, RigidTransform, field_to_ego
from fieldvision.imgproc import rgb_to_hsv
from fieldvision.synth import (
    BALL,
    BALL_RADIUS,
    GRASS,
    LINE,
    InvalidSceneError,
    Occluder,
    SceneConfig,
    carpet_mask,
    dead_reckon,
    render,
    render_trajectory,
)

SCENE = SceneConfig(pose=Pose2D(-2.0, 0.3, 0.1), ball=(-1.2, -0.4), supersample=1)


@pytest.fixture(scope="module")
def frame(cam, spec):
    return render(SCENE, cam, spec)


def test_deterministic(frame, cam, spec):
    img, gt = render(SCENE, cam, spec)
    assert np.array_equal(img, frame[0]) and np.array_equal(gt.mask, frame[1].mask)
    assert gt.landmarks == frame[1].landmarks


def test_seed_changes_noise_only(frame, cam, spec):
    img, gt = render(replace(SCENE, seed=5), cam, spec)
    assert not np.array_equal(img, frame[0])
    assert np.array_equal(gt.mask, frame[1].mask)


def test_circle_points_land_on_line_pixels(frame, cam, spec):
    _, gt = frame
    phi = np.linspace(-0.6, 0.6, 25) + math.pi  # near side of the circle
    pts = [field_to_ego(SCENE.pose, (0.75 * math.cos(a), 0.75 * math.sin(a))) for a in phi]
    px, ok = cam.worlds_to_pixels(np.c_[np.array(pts), np.zeros(len(pts))], SCENE.chain)
    assert ok.all() and cam.in_image(px, 2).all()
    line = ndimage.binary_dilation(gt.mask == LINE)
    assert all(line[int(round(y)), int(round(x))] for x, y in px)


def test_line_brighter_than_grass(frame):
    img, gt = frame
    v = rgb_to_hsv(img)[..., 2].astype(float)
    inner = ndimage.binary_erosion(gt.mask == LINE)
    assert inner.sum() > 50
    assert v[inner].mean() - v[gt.mask == GRASS].mean() >= 20


def test_ball_pixels_see_the_sphere(frame, cam):
    _, gt = frame
    (ball,) = gt.landmark("ball")
    ys, xs = np.nonzero(gt.mask == BALL)
    assert xs.size > 0.5 * math.pi * ball["radius_px"] ** 2
    pose = camera_pose(SCENE.chain)
    d = cam.pixel_rays(np.c_[xs, ys].astype(float)) @ pose.rotation.T
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    c = np.array([*ball["ego"], BALL_RADIUS]) - pose.translation
    miss = np.linalg.norm(c - (d @ c)[:, None] * d, axis=1)
    pixel_size = np.linalg.norm(c) / cam.intrinsics.focal_x
    assert miss.max() <= BALL_RADIUS + pixel_size


@pytest.mark.parametrize(
    "pose,tilt",
    [(Pose2D(-2.0, 0.3, 0.1), 30), (Pose2D(3.8, 2.5, 0.6), 20), (Pose2D(0, -2.9, -1.4), 10)],
)
def test_carpet_mask_matches_renderer(cam, spec, pose, tilt):
    chain = ExtrinsicChain(neck_tilt=math.radians(tilt))
    _, gt = render(SceneConfig(pose=pose, chain=chain, supersample=1), cam, spec)
    assert np.array_equal(carpet_mask(pose, chain, cam, spec), gt.field_mask)


def test_occluder_hides_lines(cam, spec):
    pose = Pose2D(-1.2, 0.0, 0.0)
    occ = Occluder((-0.2, 0.0), (0.4, 2.0, 1.0), (20, 20, 20))
    _, gt = render(SceneConfig(pose=pose, occluders=(occ,), supersample=1), cam, spec)
    (half,) = [lm for lm in gt.landmark("line") if lm["field"][0][0] == 0 and lm["field"][1][0] == 0]
    assert half["pixels"] == 0


def test_camera_below_ground(cam, spec):
    chain = ExtrinsicChain(camera_mount=RigidTransform(translation=(0, 0, -0.1)))
    with pytest.raises(InvalidSceneError):
        render(SceneConfig(chain=chain), cam, spec)


POSES = [Pose2D(0, 0, 0).compose(0.05 * i, 0, 0.02 * i) for i in range(20)]


def test_trajectory_zero_noise_reproduces_end(cam, spec):
    tr = render_trajectory(POSES, SceneConfig(), cam, spec, render_images=False)
    end = dead_reckon(POSES[0], tr.odometry)
    assert (end.x, end.y, end.theta) == pytest.approx((POSES[-1].x, POSES[-1].y, POSES[-1].theta), abs=1e-9)
    assert tr.magnetometer == pytest.approx([p.theta for p in POSES])


def test_trajectory_noise_drifts_and_is_seeded(cam, spec):
    a = render_trajectory(POSES, SceneConfig(), cam, spec, odometry_noise=0.02, seed=3, render_images=False)
    b = render_trajectory(POSES, SceneConfig(), cam, spec, odometry_noise=0.02, seed=3, render_images=False)
    assert a.odometry == b.odometry
    end = dead_reckon(POSES[0], a.odometry)
    assert math.hypot(end.x - POSES[-1].x, end.y - POSES[-1].y) > 0


def test_trajectory_renders_frames(cam, spec):
    tr = render_trajectory(POSES[:2], SceneConfig(supersample=1), cam, spec)
    assert len(tr.frames) == 2 and tr.frames[1][1].pose == POSES[1]
    with pytest.raises(ValueError):
        render_trajectory([], SceneConfig(), cam, spec)
