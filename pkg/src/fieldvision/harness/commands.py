"""Harness commands. Each writes deterministic files under ``out`` and returns a ``Result``.

Wall-clock timings are only ever printed, never written, so reruns with the
same config and seed produce byte-identical outputs.
"""

from __future__ import annotations

import json
import math
import operator
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..calibration import CalibObservation, CorrectionParams, InsufficientDataError, calibrate_extrinsics, projection_errors
from ..detectors import (
    BallModel,
    detect_frame,
    naive_field_boundary,
)
from ..detectors.ball import (
    expected_radius,
    extract_patch,
    load_classifier,
    reference_histograms,
    save_classifier,
    train_ball_classifier,
)
from ..geometry import Pose2D, normalize_angle, parse_correction, serialize_correction
from ..imgproc.color import WHITE, classify_colors, rgb_to_hsv
from ..imgproc.histogram import Histogram
from ..localization import LocState, OdometryDelta, localize_step, trace_record
from ..synth import ideal_detections, render
from . import metrics as M
from .config import ConfigError, RunConfig
from .dataset import Dataset, DatasetError, chain_from_record, dumps, frame_record, write_frame, write_manifest
from .scenarios import plan_scenario, scenario_rng


@dataclass
class Result:
    report: dict
    lines: list[str] = field(default_factory=list)
    ok: bool = True


def _prepare_out(out: str | Path) -> Path:
    p = Path(out)
    if p.exists() and not p.is_dir():
        raise ConfigError(f"output path {p} exists and is not a directory")
    p.mkdir(parents=True, exist_ok=True)
    return p


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _round(v, nd=6):
    if isinstance(v, float):
        return round(v, nd)
    if isinstance(v, dict):
        return {k: _round(x, nd) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_round(x, nd) for x in v]
    return v


# --- render --------------------------------------------------------------------------------


def cmd_render(cfg: RunConfig, scenario: str, out, count: int | None = None) -> Result:
    if count is not None and count < 0:
        raise ConfigError("count must be non-negative")
    s = cfg.scenario(scenario)
    root = _prepare_out(out)
    cam, spec = cfg.camera.camera(), cfg.field.spec()
    t0 = time.perf_counter()
    entries = []
    for i, plan in enumerate(plan_scenario(cfg, scenario, count)):
        img, gt = render(plan.scene, cam, spec)
        entries.append(write_frame(root, i, img, gt, frame_record(i, plan.scene, gt, plan.extra)))
    digest = write_manifest(root, scenario, s.kind, cfg.digest(), cfg.seed, entries)
    dt = time.perf_counter() - t0
    return Result(
        {"frames": len(entries), "manifest_sha256": digest, "config_hash": cfg.digest()},
        [f"rendered {len(entries)} frames of {scenario!r} into {root} ({dt:.1f} s)", f"manifest sha256 {digest}"],
    )


# --- train-ball ----------------------------------------------------------------------------


def _hist_path(classifier: Path) -> Path:
    return classifier.with_suffix(".hist.json")


def save_ball_model(path: Path, model, reference) -> None:
    path.write_bytes(save_classifier(model))
    _write_json(_hist_path(path), {h.channel: h.to_list() for h in reference})


def load_ball_model(path: str | Path) -> BallModel:
    path = Path(path)
    try:
        clf = load_classifier(path.read_bytes())
        ref = json.loads(_hist_path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read classifier {path}: {e.strerror}") from None
    return BallModel(tuple(Histogram(np.asarray(ref[c], float), c) for c in "HSV"), clf)


def _patches_from(ds: Dataset, cfg: RunConfig, rng, holdout: set[int]):
    cam = cfg.camera.camera()
    dcfg = cfg.detector.detector_config(cfg.seed)
    tr = cfg.training
    pos, neg, pos_ho, neg_ho = [], [], [], []
    ref_samples = []
    for fr in ds:
        img = fr.image()
        hsv = rgb_to_hsv(img)
        gray = hsv[..., 2]
        chain = chain_from_record(fr.record)
        lm = M.ball_visible(fr.record, cam)
        is_ho = fr.id in holdout
        if lm is not None and lm["radius_px"] >= 3.0:
            r = lm["radius_px"]
            c = np.asarray(lm["pixel"]) + rng.normal(0.0, tr.center_jitter * r, 2)
            rr = r * rng.uniform(1 - tr.radius_jitter, 1 + tr.radius_jitter)
            (pos_ho if is_ho else pos).append(extract_patch(gray, c, rr, scale=cfg.detector.ball_patch_scale))
            if not is_ho:
                ref_samples.append((fr.id, tuple(lm["pixel"]), r))
        labels = classify_colors(hsv)
        ys, xs = np.nonzero(labels == WHITE)
        if len(ys):
            if lm is not None:
                far = np.hypot(xs - lm["pixel"][0], ys - lm["pixel"][1]) > 2.0 * lm["radius_px"]
                ys, xs = ys[far], xs[far]
            take = rng.choice(len(ys), min(tr.negatives_per_frame, len(ys)), replace=False) if len(ys) else []
            for j in take:
                r = expected_radius(cam, chain, (xs[j], ys[j]), dcfg.ball_radius)
                if r is None:
                    continue
                p = extract_patch(gray, (xs[j], ys[j]), r * rng.uniform(*tr.negative_scale), scale=cfg.detector.ball_patch_scale)
                (neg_ho if is_ho else neg).append(p)
    return pos, neg, pos_ho, neg_ho, ref_samples


def cmd_train_ball(cfg: RunConfig, datasets: list[str], out) -> Result:
    sets = [Dataset(d) for d in datasets]
    root = _prepare_out(out)
    rng = scenario_rng(cfg.seed, "train-ball")
    pos, neg, pos_ho, neg_ho = [], [], [], []
    refs = []
    for ds in sets:
        ids = [ds.frame(k).id for k in range(len(ds))]
        n_ho = int(round(cfg.training.holdout_fraction * len(ids)))
        holdout = set(rng.permutation(ids)[:n_ho].tolist())
        p, n, ph, nh, rs = _patches_from(ds, cfg, rng, holdout)
        pos += p
        neg += n
        pos_ho += ph
        neg_ho += nh
        refs.append((ds, rs))
    tr = cfg.training
    t0 = time.perf_counter()
    model, rep = train_ball_classifier(
        pos,
        neg,
        stages=tr.stages,
        max_stumps=tr.max_stumps,
        stage_fpr=tr.stage_fpr,
        min_stage_tpr=tr.min_stage_tpr,
        seed=cfg.seed,
        max_negatives=tr.max_negatives,
    )
    dt = time.perf_counter() - t0

    def samples():
        for ds, rs in refs:
            by_id = {ds.frame(k).id: k for k in range(len(ds))}
            for fid, c, r in rs:
                yield rgb_to_hsv(ds.frame(by_id[fid]).image()), c, r

    reference = reference_histograms(samples())
    path = root / "ball.nblc"
    save_ball_model(path, model, reference)

    def confusion(P, N):
        tp = int(model.evaluate(model.features(P))[0].sum()) if P else 0
        fp = int(model.evaluate(model.features(N))[0].sum()) if N else 0
        return {"tp": tp, "fn": len(P) - tp, "fp": fp, "tn": len(N) - fp}

    cm = confusion(pos_ho, neg_ho)
    tpr = cm["tp"] / len(pos_ho) if pos_ho else None
    fpr = cm["fp"] / len(neg_ho) if neg_ho else None
    report = {
        "positives": len(pos),
        "training_positives": rep.n_positives,
        "negatives": len(neg),
        "training_negatives": rep.n_negatives,
        "stage_sizes": rep.stage_sizes,
        "stage_fpr": _round(rep.stage_fpr),
        "holdout": cm,
        "holdout_tpr": tpr,
        "holdout_fpr": fpr,
        "classifier": path.name,
    }
    _write_json(root / "training.json", _round(report))
    lines = [
        f"positives {len(pos)} (augmented to {rep.n_positives}), negatives {len(neg)}; trained in {dt:.1f} s",
        f"stages {rep.stage_sizes}",
        "holdout confusion matrix:",
        "            pred ball  pred not",
        f"  ball      {cm['tp']:9d} {cm['fn']:9d}",
        f"  not ball  {cm['fp']:9d} {cm['tn']:9d}",
        f"holdout TPR {tpr if tpr is None else round(tpr, 4)}  FPR {fpr if fpr is None else round(fpr, 4)}",
        f"wrote {path}",
    ]
    return Result(_round(report), lines)


# --- detect --------------------------------------------------------------------------------


def cmd_detect(cfg: RunConfig, dataset: str, out, classifier: str | None = None) -> Result:
    ds = Dataset(dataset)
    model = load_ball_model(classifier) if classifier else None
    root = _prepare_out(out)
    cam, spec = cfg.camera.camera(), cfg.field.spec()
    dcfg = cfg.detector.detector_config(cfg.seed)
    tally = M.BallTally(list(cfg.ball_buckets))
    n_parts = n_matched = n_det = n_true = 0
    circle_err, circle_missed, circle_false = [], 0, 0
    ious, naive_ious = [], []
    t0 = time.perf_counter()
    with open(root / "detections.jsonl", "w") as fh:
        for fr in ds:
            img = fr.image()
            cls_mask = fr.mask()
            chain = chain_from_record(fr.record)
            det = detect_frame(img, cam, chain, spec, model, dcfg)
            fh.write(dumps({"frame": fr.id, **det.to_record()}) + "\n")

            # boundary
            if det.boundary is not None:
                field_mask = fr.field_mask(cam, spec)
                ious.append(M.iou(det.boundary.mask(field_mask.shape), field_mask))
                labels = classify_colors(rgb_to_hsv(img), dcfg.colors)
                naive_ious.append(M.iou(naive_field_boundary(labels, cam, dcfg).mask(field_mask.shape), field_mask))
            # ball
            if model is not None:
                lm = M.ball_visible(fr.record, cam)
                if lm is not None:
                    tally.add(float(np.hypot(*lm["ego"])), M.ball_hit(det.ball_pixel, lm))
                elif fr.record.get("ball") is None:
                    tally.add_empty(det.ball_pixel is not None)
            # lines
            parts = M.visible_line_parts(fr.record, cls_mask, cam, chain, cfg.line_range)
            n_parts += len(parts)
            n_matched += sum(M.part_matched(p, det.lines) for p in parts)
            near = [s for s in det.lines if min(np.hypot(*s.p0), np.hypot(*s.p1)) <= cfg.line_range]
            n_det += len(near)
            n_true += sum(M.segment_is_true(s, fr.record, spec.circle_radius) for s in near)
            # centre circle
            c = next(lm for lm in fr.record["landmarks"] if lm["kind"] == "circle")
            visible = np.hypot(*c["ego"]) <= cfg.line_range and M.circle_visibility(
                fr.record, cls_mask, cam, chain, cfg.line_range + spec.circle_radius
            ) >= 1 / 3
            if det.circle is not None:
                e = math.dist(det.circle, c["ego"])
                if visible or e <= 0.5:
                    circle_err.append(e)
                else:
                    circle_false += 1
            elif visible:
                circle_missed += 1
    dt = time.perf_counter() - t0
    report = {
        "frames": len(ds),
        "boundary": {
            "iou": M.summary(ious),
            "naive_iou": M.summary(naive_ious),
            "beats_naive": bool(ious) and float(np.mean(ious)) > float(np.mean(naive_ious)),
        },
        "lines": {
            "visible": n_parts,
            "matched": n_matched,
            "recall": n_matched / n_parts if n_parts else None,
            "detected": n_det,
            "precision": n_true / n_det if n_det else None,
        },
        "circle": {"error": M.summary(circle_err), "missed": circle_missed, "false": circle_false},
        "ball": tally.report() if model is not None else None,
    }
    report = _round(report)
    _write_json(root / "metrics.json", report)
    b, L, C = report["boundary"], report["lines"], report["circle"]
    lines = [
        f"detected {len(ds)} frames in {dt:.1f} s ({dt / max(1, len(ds)):.2f} s/frame)",
        f"boundary IoU mean {b['iou']['mean']} (naive {b['naive_iou']['mean']})",
        f"line recall {L['recall']} over {L['visible']} visible lines, precision {L['precision']}",
        f"circle centre error {C['error']['mean']} mean, {C['error']['max']} max; missed {C['missed']}, false {C['false']}",
    ]
    if report["ball"] is not None:
        for bk in report["ball"]["buckets"]:
            lines.append(f"ball {bk['lo']:.1f}-{bk['hi']:.1f} m: {bk['hits']}/{bk['frames']} rate {bk['rate']}")
        lines.append(f"ball rate up to 4.5 m {report['ball']['rate_max_4_5']}, false positives {report['ball']['false_positive_rate']}")
    return Result(report, lines)


# --- localize ------------------------------------------------------------------------------


def cmd_localize(cfg: RunConfig, dataset: str, out) -> Result:
    ds = Dataset(dataset)
    frames = list(ds)
    if not frames:
        raise DatasetError("dataset has no frames")
    if any("odometry" not in f.record for f in frames):
        raise DatasetError("dataset has no odometry stream")
    root = _prepare_out(out)
    cam, spec = cfg.camera.camera(), cfg.field.spec()
    dcfg = cfg.detector.detector_config(cfg.seed)
    lcfg = cfg.localization.loc_config()
    ox, oy = cfg.localization.initial_offset
    p0 = frames[0].pose
    state = LocState(pose=Pose2D(p0.x + ox, p0.y + oy, p0.theta))
    errs, theta_err, corrections, flags = [], [], [], 0
    t0 = time.perf_counter()
    with open(root / "trace.jsonl", "w") as fh:
        for fr in frames:
            truth = fr.pose
            if cfg.localization.detections == "ideal":
                det = ideal_detections(truth, spec)
            else:
                det = detect_frame(fr.image(), cam, chain_from_record(fr.record), spec, None, dcfg)
            odo = OdometryDelta(*fr.record["odometry"])
            predicted = state.pose.compose(odo.dx, odo.dy, odo.dtheta)
            state, rep = localize_step(state, odo, det, fr.record.get("magnetometer"), spec, lcfg)
            corrections.append(math.hypot(state.pose.x - predicted.x, state.pose.y - predicted.y))
            e = math.hypot(state.pose.x - truth.x, state.pose.y - truth.y)
            te = math.degrees(abs(normalize_angle(state.pose.theta - truth.theta)))
            errs.append(e)
            theta_err.append(te)
            flags += bool(rep.flags)
            rec = trace_record(fr.id, state, rep)
            rec.update(truth=[truth.x, truth.y, truth.theta], error=round(e, 9), theta_error_deg=round(te, 9))
            fh.write(dumps(rec) + "\n")
    dt = time.perf_counter() - t0
    errs_a, th = np.asarray(errs), np.asarray(theta_err)
    settle = min(cfg.localization.settle_frames, len(frames) - 1)
    steady = errs_a[settle:]
    k = frames[0].record.get("kidnap_frame")
    if k is not None:
        # the kidnap window is scored by recovery, not by the steady-state mean
        steady = np.concatenate([errs_a[settle:k], errs_a[k + 30 :]]) if k > settle else errs_a[k + 30 :]
    report = {
        "frames": len(frames),
        "position_error": {
            "mean_after_settle": float(steady.mean()) if steady.size else None,
            "max_after_settle": float(steady.max()) if steady.size else None,
            "final": float(errs_a[-1]),
        },
        "theta_error_deg": {
            "final": float(th[-1]),
            "at_50": float(th[min(49, len(th) - 1)]),
            "curve": [round(float(v), 4) for v in th],
        },
        "kidnap": None
        if k is None
        else {"frame": k, "recovery_frames": M.recovery_frames(errs_a, k, cfg.localization.recovery_error)},
        "max_correction": float(max(corrections)),
        "clamp": lcfg.xy_clamp,
        "flagged_frames": flags,
    }
    report = _round(report)
    _write_json(root / "metrics.json", report)
    pe = report["position_error"]
    lines = [
        f"localized {len(frames)} frames in {dt:.1f} s",
        f"position error after frame {settle}: mean {pe['mean_after_settle']} max {pe['max_after_settle']}",
        f"theta error final {report['theta_error_deg']['final']} deg, at frame 50 {report['theta_error_deg']['at_50']} deg",
        f"largest single-frame correction {report['max_correction']} m (clamp {lcfg.xy_clamp})",
    ]
    if report["kidnap"] is not None:
        lines.append(f"kidnap at frame {k}: recovered in {report['kidnap']['recovery_frames']} frames")
    return Result(report, lines)


# --- calibrate -----------------------------------------------------------------------------


def _xyz_rpy(p: CorrectionParams) -> dict:
    v = p.as_vector()
    return {"xyz_m": [float(a) for a in v[:3]], "rpy_deg": [math.degrees(a) for a in v[3:]]}


def cmd_calibrate(cfg: RunConfig, dataset: str, out) -> Result:
    ds = Dataset(dataset)
    cam = cfg.camera.camera()
    obs, clean = [], []
    truth = None
    for fr in ds:
        cal = fr.record.get("calibration")
        if cal is None:
            continue
        chain = chain_from_record(fr.record, nominal=True)
        truth = parse_correction(fr.record["chain"]["correction"])
        for o in cal["observations"]:
            obs.append(CalibObservation(tuple(o["pixel"]), tuple(o["ego"]), chain))
            clean.append(CalibObservation(tuple(o["pixel_clean"]), tuple(o["ego"]), chain))
    if not obs:
        raise DatasetError("dataset has no calibration observations")
    try:
        params, rep = calibrate_extrinsics(
            obs,
            cam,
            max_translation=cfg.calibration.max_translation,
            max_rotation=math.radians(cfg.calibration.max_rotation_deg),
            max_restarts=cfg.calibration.max_restarts,
        )
    except InsufficientDataError as e:
        raise DatasetError(str(e)) from None
    root = _prepare_out(out)
    (root / "correction.txt").write_text(serialize_correction(params.transform()))
    zero = CorrectionParams()
    inj = CorrectionParams.from_transform(truth)
    diff = params.as_vector() - inj.as_vector()
    report = {
        "observations": len(obs),
        "injected": _xyz_rpy(inj),
        "recovered": _xyz_rpy(params),
        "max_translation_error_mm": float(np.max(np.abs(diff[:3])) * 1000),
        "max_rotation_error_deg": float(np.max(np.abs(np.degrees(diff[3:])))),
        "cost_before": rep.cost_before,
        "cost_after": rep.cost_after,
        "mean_error_before": float(projection_errors(zero, obs, cam).mean()),
        "mean_error_after": float(projection_errors(params, obs, cam).mean()),
        "clean_error_before": float(projection_errors(zero, clean, cam).mean()),
        "clean_error_after": float(projection_errors(params, clean, cam).mean()),
        "iterations": rep.iterations,
        "restarts": rep.restarts,
        "converged": rep.converged,
        "warning": None if rep.converged else "simplex hit the iteration limit",
    }
    report["reduction"] = 1.0 - report["mean_error_after"] / report["mean_error_before"] if report["mean_error_before"] > 0 else 0.0
    report["clean_reduction"] = (
        1.0 - report["clean_error_after"] / report["clean_error_before"] if report["clean_error_before"] > 0 else 0.0
    )
    report = _round(report, 9)
    _write_json(root / "calibration.json", report)
    lines = [
        f"{len(obs)} observations; restarts {rep.restarts}; converged {rep.converged}",
        f"recovered xyz (m) {report['recovered']['xyz_m']} rpy (deg) {report['recovered']['rpy_deg']}",
        f"max error vs injection: {report['max_translation_error_mm']} mm, {report['max_rotation_error_deg']} deg",
        f"mean ground error {report['mean_error_before']} -> {report['mean_error_after']} m (noise-free pixels "
        f"{report['clean_error_before']} -> {report['clean_error_after']} m)",
    ]
    if report["warning"]:
        lines.append(f"warning: {report['warning']}")
    return Result(report, lines)


# --- evaluate ------------------------------------------------------------------------------

_OPS = {">=": operator.ge, "<=": operator.le, ">": operator.gt, "<": operator.lt, "==": operator.eq}


def lookup(report: dict, dotted: str):
    v = report
    for key in dotted.split("."):
        if isinstance(v, list):
            v = v[int(key)]
        elif isinstance(v, dict) and key in v:
            v = v[key]
        else:
            return None
    return v


def cmd_evaluate(cfg: RunConfig, reports: dict[str, str], out) -> Result:
    loaded = {}
    for name, path in reports.items():
        try:
            loaded[name] = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"cannot read report {name}={path}: {e}") from None
    root = _prepare_out(out)
    rows, lines = [], []
    for chk in cfg.checks:
        if chk.report not in loaded:
            continue
        v = lookup(loaded[chk.report], chk.metric)
        passed = isinstance(v, (int, float)) and _OPS[chk.op](v, chk.value)
        rows.append({"name": chk.name, "metric": f"{chk.report}.{chk.metric}", "value": v, "op": chk.op, "bound": chk.value, "pass": passed})
        lines.append(f"{'PASS' if passed else 'FAIL'} {chk.name}: {chk.report}.{chk.metric} = {v} (need {chk.op} {chk.value})")
    with open(root / "evaluation.jsonl", "w") as fh:
        for r in rows:
            fh.write(dumps(r) + "\n")
    ok = all(r["pass"] for r in rows)
    return Result({"checks": rows, "passed": ok}, lines or ["no applicable checks"], ok)
