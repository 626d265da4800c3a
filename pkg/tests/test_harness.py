import json

import numpy as np
import pytest

from fieldvision.harness import commands
from fieldvision.harness.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main
from fieldvision.harness.config import ConfigError, load_config, parse_config, save_config
from fieldvision.harness.dataset import Dataset, chain_from_record
from fieldvision.harness.metrics import BallTally, recovery_frames
from fieldvision.harness.scenarios import plan_scenario
from fieldvision.synth import carpet_mask, render

CFG = load_config()


def test_default_config_valid():
    assert {"ball_sweep", "walk", "calibration"} <= set(CFG.scenarios)
    assert CFG.scenario("walk").kind == "trajectory"
    with pytest.raises(ConfigError):
        CFG.scenario("nope")


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config('{"seed": 1, "bogus": 2}')
    with pytest.raises(ConfigError):
        parse_config('{"camera": {"focal_x": 400, "focus": 1}}')
    with pytest.raises(ConfigError):
        parse_config('{"ball_buckets": [0, 3, 2]}')


def test_config_round_trip(tmp_path):
    p = tmp_path / "c.json"
    save_config(CFG, p)
    again = load_config(p)
    assert again == CFG and again.digest() == CFG.digest()
    assert CFG.with_seed(7).digest() != CFG.digest()
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")


def test_plans_are_seeded():
    a = plan_scenario(CFG, "benign", 5)
    b = plan_scenario(CFG, "benign", 5)
    c = plan_scenario(CFG.with_seed(1), "benign", 5)
    assert [repr(p.scene) for p in a] == [repr(p.scene) for p in b]
    assert [p.scene.pose for p in a] != [p.scene.pose for p in c]


def test_render_writes_triples(tmp_path):
    r = commands.cmd_render(CFG, "benign", tmp_path / "d", count=10)
    ds = Dataset(tmp_path / "d")
    assert len(ds) == 10 == r.report["frames"]
    names = {p.name for p in (tmp_path / "d").iterdir()}
    assert len(names) == 31 and "manifest.json" in names
    fr = ds.frame(3)
    img, gt = render(plan_scenario(CFG, "benign", 4)[3].scene, CFG.camera.camera(), CFG.field.spec())
    assert np.array_equal(fr.image(), img) and np.array_equal(fr.mask(), gt.mask)
    assert np.array_equal(fr.field_mask(CFG.camera.camera(), CFG.field.spec()), gt.field_mask)


def test_render_is_deterministic(tmp_path):
    a = commands.cmd_render(CFG, "walk", tmp_path / "a", count=3).report["manifest_sha256"]
    b = commands.cmd_render(CFG, "walk", tmp_path / "b", count=3).report["manifest_sha256"]
    assert a == b
    assert (tmp_path / "a/frame_00002.ppm").read_bytes() == (tmp_path / "b/frame_00002.ppm").read_bytes()


def test_render_zero_count(tmp_path):
    assert main(["render", "--scenario", "benign", "--count", "0", "--out", str(tmp_path / "z")]) == EXIT_OK
    assert [p.name for p in (tmp_path / "z").iterdir()] == ["manifest.json"]
    assert len(Dataset(tmp_path / "z")) == 0


def test_chain_from_record_round_trip(tmp_path):
    commands.cmd_render(CFG, "calibration", tmp_path / "c", count=1)
    fr = Dataset(tmp_path / "c").frame(0)
    plan = plan_scenario(CFG, "calibration", 1)[0]
    cam, spec = CFG.camera.camera(), CFG.field.spec()
    mine = carpet_mask(fr.pose, chain_from_record(fr.record), cam, spec)
    assert np.array_equal(mine, carpet_mask(plan.scene.pose, plan.scene.chain, cam, spec))
    assert chain_from_record(fr.record, nominal=True).correction.is_identity()


@pytest.mark.parametrize(
    "argv",
    [
        ["detect", "--dataset", "{tmp}/none"],
        ["localize", "--dataset", "{tmp}/none"],
        ["calibrate", "--dataset", "{tmp}/none"],
        ["train-ball", "--dataset", "{tmp}/none"],
        ["render", "--scenario", "no_such_scenario"],
        ["render", "--scenario", "benign", "--config", "{tmp}/none.json"],
    ],
)
def test_usage_errors_exit_2_without_output(tmp_path, argv):
    out = tmp_path / "out"
    argv = [a.format(tmp=tmp_path) for a in argv] + ["--out", str(out)]
    assert main(argv) == EXIT_USAGE
    assert not out.exists()


def test_argparse_usage_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["render"])
    assert e.value.code == 2
    with pytest.raises(SystemExit) as e:
        main(["evaluate", "--report", "nopath"])
    assert e.value.code == 2


def test_localize_rejects_non_trajectory(tmp_path):
    commands.cmd_render(CFG, "benign", tmp_path / "d", count=1)
    assert main(["localize", "--dataset", str(tmp_path / "d"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_bad_classifier_is_runtime_error(tmp_path):
    commands.cmd_render(CFG, "benign", tmp_path / "d", count=1)
    bad = tmp_path / "m.nblc"
    bad.write_text("garbage")
    rc = main(["detect", "--dataset", str(tmp_path / "d"), "--classifier", str(bad), "--out", str(tmp_path / "o")])
    assert rc == EXIT_RUNTIME


def test_localize_and_calibrate_small(tmp_path, capsys):
    d = tmp_path / "w"
    assert main(["render", "--scenario", "walk", "--count", "12", "--out", str(d)]) == EXIT_OK
    assert main(["localize", "--dataset", str(d), "--out", str(tmp_path / "lo")]) == EXIT_OK
    trace = (tmp_path / "lo/trace.jsonl").read_text().splitlines()
    assert len(trace) == 12 and all("truth" in json.loads(t) for t in trace)
    c = tmp_path / "c"
    assert main(["render", "--scenario", "calibration", "--count", "3", "--out", str(c)]) == EXIT_OK
    assert main(["calibrate", "--dataset", str(c), "--out", str(tmp_path / "co")]) == EXIT_OK
    rep = json.loads((tmp_path / "co/calibration.json").read_text())
    assert rep["max_rotation_error_deg"] < 0.2
    assert "observations" in capsys.readouterr().out


def test_evaluate(tmp_path, capsys):
    good = tmp_path / "w.json"
    good.write_text(json.dumps({"max_correction": 0.4, "position_error": {"mean_after_settle": 0.1}, "theta_error_deg": {}}))
    assert main(["evaluate", "--report", f"walk={good}", "--out", str(tmp_path / "e")]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("PASS") == 2 and "FAIL" not in out
    rows = [json.loads(x) for x in (tmp_path / "e/evaluation.jsonl").read_text().splitlines()]
    assert len(rows) == 2
    good.write_text(json.dumps({"max_correction": 0.6, "position_error": {"mean_after_settle": 0.1}}))
    assert main(["evaluate", "--report", f"walk={good}", "--out", str(tmp_path / "e")]) == EXIT_RUNTIME
    assert main(["evaluate", "--report", f"walk={tmp_path}/nope.json", "--out", str(tmp_path / "e")]) == EXIT_USAGE


def test_ball_tally_buckets():
    t = BallTally([0.0, 1.5, 3.0, 4.5, 6.0])
    for d, hit in [(1.0, True), (1.5, False), (2.0, True), (4.5, True), (5.0, False)]:
        t.add(d, hit)
    t.add_empty(False)
    t.add_empty(True)
    r = t.report()
    assert [b["frames"] for b in r["buckets"]] == [2, 1, 1, 1]
    assert r["rate_max_4_5"] == pytest.approx(3 / 4) and r["false_positive_rate"] == 0.5


def test_recovery_frames():
    e = np.array([0.1, 0.1, 3.0, 2.0, 1.0, 0.2, 0.1])
    assert recovery_frames(e, 2, 0.3) == 3
    assert recovery_frames(e[:5], 2, 0.3) is None


def test_ball_tally_edge_tolerance():
    t = BallTally([0.0, 4.5, 6.0])
    t.add(4.5 + 1e-12, True)
    assert t.report()["buckets"][0]["frames"] == 1
