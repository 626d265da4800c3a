"""End-to-end acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Datasets are rendered from the packaged default configuration into a
session temp directory and driven through the CLI entry point.
"""

import filecmp
import json
import math
import time

import numpy as np
import pytest

from fieldvision.calibration import nelder_mead
from fieldvision.detectors.ball import augment_positive
from fieldvision.geometry import RigidTransform
from fieldvision.harness.cli import EXIT_OK, main
from fieldvision.harness.config import load_config
from fieldvision.imgproc.histogram import Histogram, bhattacharyya_distance
from fieldvision.imgproc.hough import hough_segments
from fieldvision.imgproc.polygon import convex_hull, rdp_simplify
from oracles import brute_hull, planted, recovered, seg_dist

pytestmark = pytest.mark.acceptance

CFG = load_config()


@pytest.fixture
def verdict(record_property):
    def emit(n: int, name: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {name} ({detail})"
        record_property("acceptance", line)
        print("\n" + line)
        assert ok, detail

    return emit


class Workspace:
    def __init__(self, root):
        self.root = root
        self.timings = {}

    def run(self, *argv) -> None:
        t0 = time.perf_counter()
        rc = main([str(a) for a in argv])
        self.timings[argv[:2]] = time.perf_counter() - t0
        assert rc == EXIT_OK, f"fieldvision {' '.join(map(str, argv))} exited {rc}"

    def dataset(self, scenario: str):
        d = self.root / "data" / scenario
        if not (d / "manifest.json").exists():
            self.run("render", "--scenario", scenario, "--out", d)
        return d

    def report(self, command: str, scenario: str, *extra, file="metrics.json") -> dict:
        out = self.root / command / scenario
        if not (out / file).exists():
            self.run(command, "--dataset", self.dataset(scenario), "--out", out, *extra)
        return json.loads((out / file).read_text())

    def classifier(self):
        out = self.root / "train"
        if not (out / "ball.nblc").exists():
            self.run("train-ball", "--dataset", self.dataset("ball_train"), "--out", out)
        return out / "ball.nblc"


@pytest.fixture(scope="session")
def ws(tmp_path_factory):
    return Workspace(tmp_path_factory.mktemp("acceptance"))


def test_1_ball_detection(ws, verdict):
    model = ws.classifier()
    rep = ws.report("detect", "ball_sweep", "--classifier", model)["ball"]
    secs = ws.timings.get(("detect", "--dataset"), 0.0)
    far = ws.report("detect", "ball_far", "--classifier", model)["ball"]
    far_rates = {f"{b['hi']:.0f} m": b["rate"] for b in far["buckets"] if b["frames"]}
    print(f"\ninformational: stationary far-range rates {far_rates}")
    record_note = f"ball rate by distance beyond 4.5 m (informational): {far_rates}"
    ok = rep["rate_max_4_5"] >= 0.8 and rep["frames_max_4_5"] >= 200 and secs <= 300
    verdict(1, "ball detection up to 4.5 m", ok,
            f"rate {rep['rate_max_4_5']:.3f} over {rep['frames_max_4_5']} frames, detection {secs:.0f} s; {record_note}")


def test_2_lines_and_circle(ws, verdict):
    rep = ws.report("detect", "benign")
    recall, err = rep["lines"]["recall"], rep["circle"]["error"]["max"]
    ok = recall >= 0.9 and err is not None and err <= 0.2
    verdict(2, "line recall and circle centre", ok, f"recall {recall}, circle error max {err} m over {rep['circle']['error']['n']}")


def test_3_field_boundary(ws, verdict):
    b = ws.report("detect", "boundary")["boundary"]
    ok = b["iou"]["min"] >= 0.97 and b["iou"]["mean"] > b["naive_iou"]["mean"] and bool(b["beats_naive"])
    verdict(3, "field boundary IoU", ok,
            f"IoU min {b['iou']['min']} mean {b['iou']['mean']}, naive hull mean {b['naive_iou']['mean']}")


def test_4_heading_bias(ws, verdict):
    th = ws.report("localize", "mag_bias")["theta_error_deg"]
    ok = th["at_50"] <= 2.0 and max(th["curve"][49:]) <= 2.0
    verdict(4, "30 deg magnetometer bias", ok, f"heading error {th['at_50']} deg at frame 50, final {th['final']}")


def test_5_localization(ws, verdict):
    walk = ws.report("localize", "walk")
    kid = ws.report("localize", "kidnap")
    mean = walk["position_error"]["mean_after_settle"]
    rec = kid["kidnap"]["recovery_frames"]
    jump = max(walk["max_correction"], kid["max_correction"])
    ok = mean <= 0.3 and rec is not None and rec <= 30 and jump <= walk["clamp"] + 1e-9
    verdict(5, "localization", ok, f"mean error {mean} m, kidnap recovered in {rec} frames, max correction {jump} m")


def test_6_calibration(ws, verdict):
    clean = ws.report("calibrate", "calibration", file="calibration.json")
    noisy = ws.report("calibrate", "calibration_noisy", file="calibration.json")
    rosen = nelder_mead(lambda v: (1 - v[0]) ** 2 + 100 * (v[1] - v[0] ** 2) ** 2, [-1.2, 1.0], step=0.5, tol=1e-14)
    ok = (
        clean["max_rotation_error_deg"] <= 0.2
        and clean["max_translation_error_mm"] <= 2.0
        and noisy["clean_reduction"] >= 0.7
        and np.allclose(rosen.x, 1.0, atol=1e-3)
    )
    verdict(6, "extrinsic calibration", ok,
            f"{clean['max_rotation_error_deg']:.4f} deg / {clean['max_translation_error_mm']:.4f} mm, "
            f"noisy reduction {noisy['clean_reduction']:.3f}, Rosenbrock {np.round(rosen.x, 6).tolist()}")


def test_7_oracles(verdict):
    rng = np.random.default_rng(2024)
    hull_ok = all(
        {tuple(p) for p in convex_hull(pts)} == brute_hull(pts)
        for pts in (rng.integers(0, 60, (200, 2)).astype(float) for _ in range(5))
    )
    a, b = Histogram([1.0, 0.0], "H"), Histogram([0.5, 0.5], "H")
    bh = bhattacharyya_distance(a, b)
    bh_ok = abs(bh - math.sqrt(1 - math.sqrt(0.5))) < 1e-12 and abs(bh - 0.54120) < 5e-6

    hits = total = 0
    for k in range(100):
        segs = []
        while len(segs) < 2:
            p = rng.uniform(5, 155, 2)
            phi = rng.uniform(0, math.pi)
            q = p + rng.uniform(40, 100) * np.array([math.cos(phi), math.sin(phi)])
            if np.all((q >= 5) & (q <= 155)):
                segs.append((p, q))
        dets = hough_segments(planted((160, 160), segs, 0.05 * rng.random(), rng), 20, 3, 15, seed=k)
        total += 2
        hits += sum(recovered(np.rint(s), dets) for s in segs)

    rdp_ok = True
    for _ in range(20):
        pts = np.cumsum(rng.normal(size=(80, 2)), axis=0)
        eps = float(rng.uniform(0.3, 3.0))
        idx = [int(np.flatnonzero((pts == q).all(axis=1))[0]) for q in rdp_simplify(pts, eps)]
        rdp_ok &= all(np.all(seg_dist(pts[i : j + 1], pts[i], pts[j]) <= eps + 1e-9) for i, j in zip(idx, idx[1:]))

    tf_err = 0.0
    for _ in range(200):
        t1 = RigidTransform.from_xyz_rpy(*rng.uniform(-5, 5, 3), *rng.uniform(-1.5, 1.5, 3))
        t2 = RigidTransform.from_xyz_rpy(*rng.uniform(-5, 5, 3), *rng.uniform(-1.5, 1.5, 3))
        p = rng.uniform(-5, 5, 3)
        A, B = t1.as_matrix(), t2.as_matrix()
        tf_err = max(
            tf_err,
            np.abs((t1 @ t2).as_matrix() - A @ B).max(),
            np.abs(t1.inverse().as_matrix() - np.linalg.inv(A)).max(),
            np.abs(t1.apply(p) - (A @ np.r_[p, 1.0])[:3]).max(),
        )
    ok = hull_ok and bh_ok and hits / total >= 0.95 and rdp_ok and tf_err <= 1e-9
    verdict(7, "oracle equivalences", ok,
            f"hull {hull_ok}, Bhattacharyya {bh:.5f}, Hough recall {hits / total:.3f}, RDP {rdp_ok}, transform err {tf_err:.1e}")


def test_8_augmentation(verdict):
    rng = np.random.default_rng(8)
    patches = [rng.integers(0, 256, (32, 32)).astype(np.uint8) for _ in range(5)]
    outs = [augment_positive(p) for p in patches]
    ok = all(len(o) == 10 and np.array_equal(o[0], p) for o, p in zip(outs, patches))
    verdict(8, "ten augmented samples per positive", ok, f"sizes {[len(o) for o in outs]}")


def _same_tree(a, b) -> bool:
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    return files_a == files_b and all(filecmp.cmp(a / f, b / f, shallow=False) for f in files_a)


def test_9_determinism(tmp_path, verdict):
    def pipeline(root):
        steps = [
            ("render", "--scenario", "ball_train", "--count", "60", "--out", root / "train_data"),
            ("render", "--scenario", "walk", "--count", "20", "--out", root / "walk"),
            ("render", "--scenario", "calibration", "--out", root / "cal"),
            ("train-ball", "--dataset", root / "train_data", "--out", root / "model"),
            ("detect", "--dataset", root / "train_data", "--classifier", root / "model/ball.nblc", "--out", root / "det"),
            ("localize", "--dataset", root / "walk", "--out", root / "loc"),
            ("calibrate", "--dataset", root / "cal", "--out", root / "calib"),
            ("evaluate", "--report", f"walk={root / 'loc/metrics.json'}", "--out", root / "eval"),
        ]
        for argv in steps:
            main([str(a) for a in argv])

    pipeline(tmp_path / "a")
    pipeline(tmp_path / "b")
    dirs = ["train_data", "walk", "cal", "model", "det", "loc", "calib", "eval"]
    same = {d: (tmp_path / "a" / d).is_dir() and _same_tree(tmp_path / "a" / d, tmp_path / "b" / d) for d in dirs}
    verdict(9, "byte-identical reruns", all(same.values()), ", ".join(f"{d} {'same' if s else 'DIFFERS'}" for d, s in same.items()))
