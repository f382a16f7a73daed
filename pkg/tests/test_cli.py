import json

import numpy as np
import pytest

from dronemosaic import Rect, crop, load_image, make_scene, save_image
from dronemosaic.cli import EXIT_CONFIG, EXIT_IO, EXIT_NO_ALIGNMENT, EXIT_OK, EXIT_PARTIAL, main
from oracles import gaussian_blob


@pytest.fixture(scope="module")
def terrain():
    return make_scene(900, 1200, seed=13)


def _save(img, path):
    save_image(np.asarray(img, dtype=np.uint8), path)
    return str(path)


def _column(terrain, tmp_path, n=3, spacing=336):
    return [_save(crop(terrain, Rect(100, 700 - i * spacing, 640, 480)), tmp_path / f"f{i}.png") for i in range(n)]


def test_detect_constant_image(tmp_path):
    img = _save(np.full((64, 64, 3), 120), tmp_path / "flat.png")
    assert main(["detect", img, "--out", str(tmp_path)]) == EXIT_OK
    assert json.loads((tmp_path / "keypoints.json").read_text()) == []


def test_detect_missing_file(tmp_path, capsys):
    assert main(["detect", str(tmp_path / "nope.png"), "--out", str(tmp_path)]) == EXIT_IO
    assert "nope.png" in capsys.readouterr().err


def test_bad_config_exit_code(tmp_path):
    img = _save(np.full((64, 64, 3), 120), tmp_path / "flat.png")
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"detector": {"octaves": 0}}))
    assert main(["detect", img, "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_keypoints_round_trip_through_match(tmp_path):
    blob = gaussian_blob(96, 40.3, 51.7, 4.0)
    img = _save(np.repeat(np.rint(blob)[:, :, None], 3, axis=2), tmp_path / "blob.png")
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["detect", img, "--out", str(a), "--viz"]) == EXIT_OK
    assert (a / "keypoints.png").exists()
    kp = a / "keypoints.json"
    assert len(json.loads(kp.read_text())) >= 1
    assert main(["match", img, img, "--keypoints-a", str(kp), "--keypoints-b", str(kp), "--out", str(b)]) == EXIT_OK
    assert (b / "keypoints_a.json").read_bytes() == kp.read_bytes()
    assert (b / "keypoints_b.json").read_bytes() == kp.read_bytes()


def test_match_self_gives_zero_distances(terrain, tmp_path):
    img = _save(crop(terrain, Rect(0, 0, 320, 240)), tmp_path / "t.png")
    assert main(["match", img, img, "--cross-check", "--out", str(tmp_path), "--viz"]) == EXIT_OK
    matches = json.loads((tmp_path / "matches.json").read_text())
    assert matches and all(m["distance"] == 0 for m in matches)
    assert (tmp_path / "matches.png").exists()


def test_match_disjoint_pair_still_succeeds(terrain, tmp_path):
    a = _save(crop(terrain, Rect(0, 0, 200, 200)), tmp_path / "a.png")
    b = _save(crop(terrain, Rect(600, 900, 200, 200)), tmp_path / "b.png")
    assert main(["match", a, b, "--out", str(tmp_path)]) == EXIT_OK
    assert len(json.loads((tmp_path / "matches.json").read_text())) < 10


def test_stitch_single_frame(terrain, tmp_path):
    f = _save(crop(terrain, Rect(5, 5, 200, 150)), tmp_path / "one.png")
    out = tmp_path / "out"
    assert main(["stitch", f, "--out", str(out)]) == EXIT_OK
    np.testing.assert_array_equal(load_image(out / "mosaic.png"), load_image(f))


def test_stitch_column(terrain, tmp_path):
    frames = _column(terrain, tmp_path)
    out = tmp_path / "out"
    assert main(["stitch", *frames, "--out", str(out)]) == EXIT_OK
    np.testing.assert_array_equal(load_image(out / "mosaic.png"), terrain[28:1180, 100:740])
    report = json.loads((out / "report.json").read_text())
    assert [p["pair"] for p in report["pairs"]] == [["f0.png", "f1.png"], ["f1.png", "f2.png"]]
    assert list(report["pairs"][0])[:6] == ["pair", "matches", "inliers", "tx", "ty", "seam"]


def test_stitch_partial_and_no_alignment(terrain, tmp_path):
    frames = _column(terrain, tmp_path)
    frames[2] = _save(np.full((480, 640, 3), 60), tmp_path / "blank.png")
    out = tmp_path / "partial"
    assert main(["stitch", *frames, "--out", str(out)]) == EXIT_PARTIAL
    report = json.loads((out / "report.json").read_text())
    assert len(report["pairs"]) == 1 and report["overall"]["failures"][0]["pair"] == ["f1.png", "blank.png"]
    assert load_image(out / "mosaic.png").shape == (816, 640, 3)
    out2 = tmp_path / "none"
    assert main(["stitch", frames[2], frames[0], "--out", str(out2)]) == EXIT_NO_ALIGNMENT
    assert (out2 / "report.json").exists()


def test_simulate_is_byte_deterministic(tmp_path):
    args = ["simulate", "--camera", "bottom", "--columns", "2", "--rows", "2", "--jitter", "2", "--seed", "5"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(args + ["--out", str(a)]) == EXIT_OK
    assert main(args + ["--out", str(b)]) == EXIT_OK
    names = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    assert len(names) == 4 + 3  # frames, scene, poses, plan
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_simulate_scene_too_small_is_config_error(tmp_path):
    assert main(["simulate", "--scene-size", "300x300", "--out", str(tmp_path)]) == EXIT_CONFIG


@pytest.mark.slow
def test_simulate_stitch_evaluate_pipeline(tmp_path):
    sim, st, ev = tmp_path / "sim", tmp_path / "st", tmp_path / "ev"
    assert main(["simulate", "--out", str(sim), "--seed", "0"]) == EXIT_OK
    plan = json.loads((sim / "plan.json").read_text())
    assert plan["columns"] == plan["rows"] == 4 and len(plan["frames"]) == 16
    assert main(["stitch", "--plan", str(sim / "plan.json"), "--out", str(st)]) == EXIT_OK
    report = json.loads((st / "report.json").read_text())
    assert len(report["pairs"]) == 15 and report["overall"]["failures"] == []
    assert main([
        "evaluate", str(st / "mosaic.png"), str(sim / "scene.png"), str(sim / "poses.json"),
        "--plan", str(sim / "plan.json"), "--report", str(st / "report.json"), "--out", str(ev),
    ]) == EXIT_OK
    metrics = json.loads((ev / "metrics.json").read_text())
    assert metrics["rmse"] == 0 and metrics["coverage"] == 1.0
    assert len(metrics["seam_errors"]) == 15
