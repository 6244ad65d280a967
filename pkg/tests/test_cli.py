"""End-to-end checks of the command-line driver through real files."""

import json
from pathlib import Path

import numpy as np
import pytest

from casctrack import cli, io, simulator
from casctrack.depthops import DepthMap
from casctrack.metrics import PanopticMap


def write_intrinsics(path):
    io.write_intrinsics(path, simulator.DEFAULT_INTRINSICS)
    return str(path)


def write_scenario(path, **overrides):
    doc = {"seed": 5, "num_objects": 4, "num_frames": 12, "min_separation": 2.0}
    doc.update(overrides)
    io.write_results(path, doc)
    return str(path)


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------- simulate


def test_simulate_scenario_writes_detections_truth_and_manifest(tmp_path):
    scen = write_scenario(tmp_path / "scene.json")
    out = tmp_path / "out"
    assert cli.main(["simulate", "--scenario", scen, "--out", str(out)]) == 0
    seq, kernel_dim, frames = io.read_detections(out / "scene.detections.txt")
    assert seq == "scene-seed5"
    assert kernel_dim == 32
    assert len(frames) == 12
    truth_doc = read_json(out / "scene.truth.json")
    assert truth_doc["format"] == "truth v1"
    assert len(truth_doc["tracks"]) == 4
    manifest = read_json(out / "manifest.json")
    assert manifest["command"] == "simulate"
    assert manifest["config"]["scene"]["num_objects"] == 4
    assert str(out / "scene.detections.txt") in manifest["outputs"]


def test_simulate_seed_flag_overrides_config_file(tmp_path):
    scen = write_scenario(tmp_path / "scene.json", seed=5)
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["simulate", "--scenario", scen, "--out", str(out_a)]) == 0
    assert cli.main(["simulate", "--scenario", scen, "--seed", "99",
                     "--out", str(out_b)]) == 0
    doc = read_json(out_b / "manifest.json")
    assert doc["config"]["scene"]["seed"] == 99
    # same geometry either way: the truth documents agree except nothing —
    # geometry does not move with the noise seed
    ta = read_json(out_a / "scene.truth.json")
    tb = read_json(out_b / "scene.truth.json")
    assert ta["tracks"] == tb["tracks"]


def test_simulate_table2_suite_is_byte_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    for out in (out_a, out_b):
        assert cli.main(["simulate", "--suite", "table2", "--seed", "7",
                         "--out", str(out)]) == 0
    names = sorted(p.name for p in out_a.iterdir())
    assert names == sorted(p.name for p in out_b.iterdir())
    assert {"appearance_stress.detections.txt", "balanced.detections.txt",
            "spatial_stress.detections.txt"} <= set(names)
    for name in names:
        if name == "manifest.json":  # identical but for wall-clock timings
            ma, mb = read_json(out_a / name), read_json(out_b / name)
            ma.pop("timings"), mb.pop("timings")
            ma.pop("outputs"), mb.pop("outputs")  # embed the out dir path
            assert ma == mb
        else:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_simulate_table2_requires_seed(tmp_path):
    assert cli.main(["simulate", "--suite", "table2",
                     "--out", str(tmp_path / "x")]) == 2


def test_simulate_rejects_malformed_scenario(tmp_path):
    scen = tmp_path / "scene.json"
    io.write_results(scen, {"seed": 1, "num_objects": 2, "num_frames": 5,
                            "no_such_field": True})
    assert cli.main(["simulate", "--scenario", scen.as_posix(),
                     "--out", str(tmp_path / "out")]) == 1


# ------------------------------------------------------------------- track


def test_track_recovers_identity_on_a_noiseless_scene(tmp_path):
    scen = write_scenario(tmp_path / "scene.json", num_objects=6, num_frames=20)
    out = tmp_path / "sim"
    assert cli.main(["simulate", "--scenario", scen, "--out", str(out)]) == 0
    tracks = tmp_path / "tracks.txt"
    assert cli.main([
        "track", "--detections", str(out / "scene.detections.txt"),
        "--intrinsics", write_intrinsics(tmp_path / "intr.txt"),
        "--stages", "am,sm", "--out", str(tracks),
    ]) == 0

    truth = simulator.truth_from_document(read_json(out / "scene.truth.json"))
    _, records = io.read_tracks(tracks)
    per_frame = [[] for _ in range(20)]
    for frame, det_index, track_id in records:
        per_frame[frame].append((det_index, track_id))
    score = simulator.score_against_truth(per_frame, truth)
    assert score.aq == 1.0 and score.stq == 1.0
    assert score.id_switches == 0

    manifest = read_json(str(tracks) + ".manifest.json")
    assert manifest["command"] == "track"
    assert manifest["config"]["stages"] == ["am", "sm"]
    assert manifest["config"]["kernel_dim"] == 32


def test_track_rerun_is_byte_identical(tmp_path):
    scen = write_scenario(tmp_path / "scene.json",
                          embedding_noise_sigma=0.2, depth_noise_sigma=0.05)
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    intr = write_intrinsics(tmp_path / "intr.txt")
    paths = [tmp_path / "a.txt", tmp_path / "b.txt"]
    for p in paths:
        assert cli.main(["track", "--detections", str(out / "scene.detections.txt"),
                         "--intrinsics", intr, "--out", str(p)]) == 0
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_track_spatial_stage_needs_intrinsics(tmp_path):
    scen = write_scenario(tmp_path / "scene.json")
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    tracks = tmp_path / "tracks.txt"
    code = cli.main(["track", "--detections", str(out / "scene.detections.txt"),
                     "--stages", "am,sm", "--out", str(tracks)])
    assert code == 2
    assert not tracks.exists()


def test_track_appearance_only_runs_without_intrinsics(tmp_path):
    scen = write_scenario(tmp_path / "scene.json")
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    tracks = tmp_path / "tracks.txt"
    assert cli.main(["track", "--detections", str(out / "scene.detections.txt"),
                     "--stages", "am", "--out", str(tracks)]) == 0
    assert tracks.exists()


def test_track_bad_gate_is_a_usage_error(tmp_path):
    scen = write_scenario(tmp_path / "scene.json")
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    assert cli.main(["track", "--detections", str(out / "scene.detections.txt"),
                     "--stages", "am", "--am-gate", "-1",
                     "--out", str(tmp_path / "t.txt")]) == 2


# ---------------------------------------------------------------- evaluate


def toy_raster_dirs(tmp_path, frames=3, overshoot=1.2):
    """Two-tube 4x4 scene; prediction equals truth except depth overshoots."""
    pred, truth = tmp_path / "pred", tmp_path / "truth"
    pred.mkdir(), truth.mkdir()
    sem = np.ones((4, 4), dtype=np.uint16)
    inst = np.zeros((4, 4), dtype=np.uint16)
    inst[:, :2], inst[:, 2:] = 1, 2
    valid = np.ones((4, 4), dtype=bool)
    for f in range(frames):
        io.write_raster(truth / f"{f:03d}.seg.upr", PanopticMap(sem, inst))
        io.write_raster(pred / f"{f:03d}.seg.upr", PanopticMap(sem, inst))
        io.write_raster(truth / f"{f:03d}.dep.upr",
                        DepthMap(np.full((4, 4), 10.0), valid))
        io.write_raster(pred / f"{f:03d}.dep.upr",
                        DepthMap(np.full((4, 4), 10.0 * overshoot), valid))
    return str(pred), str(truth)


def test_evaluate_dvpq_voiding_and_infinity_cells(tmp_path):
    pred, truth = toy_raster_dirs(tmp_path)  # abs-rel error 0.2 everywhere
    out = tmp_path / "dv.json"
    assert cli.main(["evaluate", "--mode", "dvpq", "--pred", pred,
                     "--truth", truth, "--things", "1",
                     "--lambda-grid", "0.1,0.25,inf", "--k-grid", "1,2",
                     "--out", str(out)]) == 0
    doc = read_json(out)
    by_lam = {}
    for cell in doc["cells"]:
        by_lam.setdefault(cell["lam"], []).append(cell["value"])
    assert by_lam[0.1] == [0.0, 0.0]      # everything voided, both tubes FN
    assert by_lam[0.25] == [1.0, 1.0]     # error 0.2 < 0.25 keeps all pixels
    assert by_lam["inf"] == [1.0, 1.0]
    assert doc["dvpq"] == pytest.approx(4 / 6)
    assert doc["dvpq_thing"] == pytest.approx(4 / 6)
    assert doc["dvpq_stuff"] == 0.0
    assert out.with_suffix(".json.svg").exists()


def test_evaluate_dvpq_at_infinity_matches_vpq_mode_exactly(tmp_path):
    pred, truth = toy_raster_dirs(tmp_path)
    dv, vp = tmp_path / "dv.json", tmp_path / "vp.json"
    assert cli.main(["evaluate", "--mode", "dvpq", "--pred", pred, "--truth", truth,
                     "--lambda-grid", "inf", "--k-grid", "1,2,3",
                     "--out", str(dv)]) == 0
    assert cli.main(["evaluate", "--mode", "vpq", "--pred", pred, "--truth", truth,
                     "--k-grid", "1,2,3", "--out", str(vp)]) == 0
    dv_doc, vp_doc = read_json(dv), read_json(vp)
    assert [c["value"] for c in dv_doc["cells"]] == [c["value"] for c in vp_doc["cells"]]
    assert dv_doc["dvpq"] == vp_doc["vpq"]


def test_evaluate_stq_reports_all_three_numbers(tmp_path):
    pred, truth = toy_raster_dirs(tmp_path)
    out = tmp_path / "st.json"
    assert cli.main(["evaluate", "--mode", "stq", "--pred", pred,
                     "--truth", truth, "--out", str(out)]) == 0
    doc = read_json(out)
    assert doc["stq"] == doc["aq"] == doc["sq"] == 1.0
    assert doc["mode"] == "stq" and doc["frames"] == 3


def test_evaluate_names_the_missing_frame(tmp_path, capsys):
    pred, truth = toy_raster_dirs(tmp_path)
    (Path(truth) / "001.seg.upr").unlink()
    out = tmp_path / "never.json"
    code = cli.main(["evaluate", "--mode", "stq", "--pred", pred,
                     "--truth", truth, "--out", str(out)])
    assert code == 1
    assert "001" in capsys.readouterr().err
    assert not out.exists()


def test_evaluate_dvpq_requires_depth_rasters(tmp_path, capsys):
    pred, truth = toy_raster_dirs(tmp_path)
    (Path(pred) / "002.dep.upr").unlink()
    code = cli.main(["evaluate", "--mode", "dvpq", "--pred", pred,
                     "--truth", truth, "--out", str(tmp_path / "x.json")])
    assert code == 1
    assert "002" in capsys.readouterr().err


def test_evaluate_bad_grid_is_a_usage_error(tmp_path):
    pred, truth = toy_raster_dirs(tmp_path)
    assert cli.main(["evaluate", "--mode", "vpq", "--pred", pred, "--truth", truth,
                     "--k-grid", "1,zero", "--out", str(tmp_path / "x.json")]) == 2


def test_failure_after_first_output_removes_it(tmp_path, monkeypatch):
    pred, truth = toy_raster_dirs(tmp_path)
    out = tmp_path / "st.json"

    def boom(*args, **kwargs):
        raise OSError("disk full")

    monkeypatch.setattr(cli, "_write_svg_bars", boom)
    code = cli.main(["evaluate", "--mode", "stq", "--pred", pred,
                     "--truth", truth, "--out", str(out)])
    assert code == 1
    assert not out.exists()  # written before the failure, removed after


# ----------------------------------------------------------------- profile


def test_profile_reports_stage_deltas(tmp_path):
    scen = write_scenario(tmp_path / "scene.json", num_objects=5, num_frames=8)
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    prof = tmp_path / "prof.json"
    assert cli.main(["profile", "--detections", str(out / "scene.detections.txt"),
                     "--repetitions", "2", "--out", str(prof)]) == 0
    doc = read_json(prof)
    assert set(doc["per_stage"]) == {"none", "am", "sm", "am_sm"}
    for stats in doc["per_stage"].values():
        assert set(stats) == {"mean_ms", "p50_ms", "p99_ms", "delta_ms"}
        assert stats["p50_ms"] <= stats["p99_ms"]
    assert doc["per_stage"]["none"]["delta_ms"] == 0.0
    assert doc["frames"] == 8 and doc["repetitions"] == 2
    assert prof.with_suffix(".json.svg").exists()
    assert read_json(str(prof) + ".manifest.json")["command"] == "profile"


def test_profile_rejects_zero_repetitions(tmp_path):
    scen = write_scenario(tmp_path / "scene.json")
    out = tmp_path / "sim"
    cli.main(["simulate", "--scenario", scen, "--out", str(out)])
    assert cli.main(["profile", "--detections", str(out / "scene.detections.txt"),
                     "--repetitions", "0", "--out", str(tmp_path / "p.json")]) == 2


# ------------------------------------------------------------------- misc


def test_version_and_usage_errors_return_codes():
    assert cli.main(["--version"]) == 0
    assert cli.main(["no-such-command"]) == 2
    assert cli.main([]) == 2
