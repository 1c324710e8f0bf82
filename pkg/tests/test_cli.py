import json
import re
import shutil
from pathlib import Path

import numpy as np
import pytest

from kcs.cli import main
from kcs.datasets import human15_mean_pose, human15_skeleton
from kcs.io import read_json, read_poses, read_tracks, write_poses, write_skeleton

from conftest import random_rotation
from mini_cmu import amc_text, asf_text

GOLDEN = Path(__file__).parent / "data" / "golden"


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def golden(tmp_path):
    for p in GOLDEN.iterdir():
        shutil.copy(p, tmp_path / p.name)
    return tmp_path


def _reconstruct(d, *extra):
    return run("reconstruct", "--tracks", d / "tracks_000.csv", "--skeleton", d / "skeleton.skel",
               "--mean-pose", d / "mean_pose.csv", "--out", d / "out.csv", *extra)


def test_reconstruct_matches_golden(golden):
    assert _reconstruct(golden) == 0
    got, names, _ = read_poses(golden / "out.csv")
    want, _, _ = read_poses(GOLDEN / "expected_poses.csv", names)
    np.testing.assert_allclose(got, want, atol=1e-6)
    diag = read_json(golden / "out.csv.diagnostics.json")
    assert diag["converged"] and diag["format"] == "kcs-diagnostics"


def test_reconstruct_rerun_byte_identical(golden):
    assert _reconstruct(golden, "--diagnostics", golden / "a.json") == 0
    assert _reconstruct(golden, "--diagnostics", golden / "b.json") == 0
    assert (golden / "a.json").read_bytes() == (golden / "b.json").read_bytes()


def test_reconstruct_missing_record(golden, capsys):
    lines = (golden / "tracks_000.csv").read_text().splitlines(keepends=True)
    lines = [ln for ln in lines if not ln.startswith("3,relbow,")]
    (golden / "tracks_000.csv").write_text("".join(lines))
    assert _reconstruct(golden) == 1
    err = capsys.readouterr().err
    assert "dense format violated" in err and "frame 3" in err and "'relbow'" in err
    assert not (golden / "out.csv").exists()


def test_reconstruct_name_mismatch(golden, capsys):
    text = (golden / "tracks_000.csv").read_text().replace(",lwrist,", ",lhand,")
    (golden / "tracks_000.csv").write_text(text)
    assert _reconstruct(golden) == 1
    err = capsys.readouterr().err
    assert "'lhand'" in err and "'lwrist'" in err


def test_reconstruct_parse_error_names_line(golden, capsys):
    lines = (golden / "tracks_000.csv").read_text().splitlines(keepends=True)
    idx = next(i for i, ln in enumerate(lines) if ln.startswith("0,rknee,"))
    lines[idx] = "0,rknee,abc,1.0\n"
    (golden / "tracks_000.csv").write_text("".join(lines))
    assert _reconstruct(golden) == 1
    assert f"tracks_000.csv:{idx + 1}:" in capsys.readouterr().err


def test_non_convergence_exits_2_with_diagnostics(golden):
    assert _reconstruct(golden, "--max-outer", 1) == 2
    diag = read_json(golden / "out.csv.diagnostics.json")
    assert not diag["converged"] and diag["outer_iterations"] == 1
    assert (golden / "out.csv").exists()


def test_degenerate_geometry_exits_2(tmp_path, capsys):
    sk = human15_skeleton()
    write_skeleton(tmp_path / "s.skel", sk)
    flat = np.zeros((2, 3, 15))
    flat[:, 0] = np.arange(15)
    write_poses(tmp_path / "flat.csv", flat[:1], sk.names)
    from kcs.io import write_tracks

    write_tracks(tmp_path / "t.csv", flat[:, :2], sk.names)
    code = run("reconstruct", "--tracks", tmp_path / "t.csv", "--skeleton", tmp_path / "s.skel",
               "--mean-pose", tmp_path / "flat.csv", "--out", tmp_path / "o.csv")
    assert code == 2
    assert "collinear" in capsys.readouterr().err
    assert not (tmp_path / "o.csv").exists()


def test_config_file_and_override(golden):
    (golden / "cfg.json").write_text(json.dumps({"k": 2, "lambda": 50.0, "max_outer": 4}))
    assert _reconstruct(golden, "--config", golden / "cfg.json", "--k", 3) == 0
    settings = read_json(golden / "out.csv.diagnostics.json")["settings"]
    assert settings["k"] == 3 and settings["lambda"] == 50.0 and settings["max_outer"] == 4


def test_config_unknown_key(golden, capsys):
    (golden / "cfg.json").write_text(json.dumps({"kk": 2}))
    assert _reconstruct(golden, "--config", golden / "cfg.json") == 1
    assert "unknown config keys" in capsys.readouterr().err


def test_usage_errors(tmp_path, capsys):
    assert run("reconstruct", "--tracks", tmp_path / "x.csv") == 1
    assert "--skeleton" in capsys.readouterr().err
    with pytest.raises(SystemExit) as info:
        run("reconstruct", "--bogus")
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run()
    assert info.value.code == 1


def test_synth_twenty_paths(tmp_path):
    assert run("synth", "--out-dir", tmp_path / "a", "--paths", 20, "--frames", 10, "--seed", 5) == 0
    assert run("synth", "--out-dir", tmp_path / "b", "--paths", 20, "--frames", 10, "--seed", 5) == 0
    tracks = sorted((tmp_path / "a").glob("tracks_*.csv"))
    assert len(tracks) == 20
    seeds = [read_tracks(p)[2]["path_seed"] for p in tracks]
    assert len(set(seeds)) == 20
    for p in tracks:
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_synth_metadata_echo(tmp_path):
    assert run("synth", "--out-dir", tmp_path, "--frames", 12, "--noise", 2.0, "--max-rotation", 10,
               "--scale-min", 80, "--scale-max", 120, "--seed", 9) == 0
    meta = read_tracks(tmp_path / "tracks_000.csv")[2]
    echo = meta["synth"]
    for key, val in {"frames": 12, "noise": 2.0, "max_rotation": 10.0, "scale_min": 80.0, "scale_max": 120.0,
                     "seed": 9, "paths": 1, "motion": "walk"}.items():
        assert echo[key] == val
    assert meta["motion"]["num_frames"] == 12


def test_synth_invalid_values(tmp_path, capsys):
    assert run("synth", "--out-dir", tmp_path, "--noise", -1) == 1
    assert run("synth", "--out-dir", tmp_path, "--scale-min", 0) == 1
    assert run("synth", "--out-dir", tmp_path, "--paths", 0) == 1


def test_evaluate_ground_truth_against_itself(tmp_path):
    assert run("synth", "--out-dir", tmp_path, "--frames", 8) == 0
    gt = tmp_path / "ground_truth_000.csv"
    assert run("evaluate", "--estimate", gt, "--ground-truth", gt, "--out", tmp_path / "m.json") == 0
    m = read_json(tmp_path / "m.json")
    assert m["sequence_3d_error"] < 1e-12 and m["mean_mpjpe"] == 0
    assert len(m["per_frame"]) == 8


def test_evaluate_similarity_transformed(tmp_path, rng):
    sk = human15_skeleton()
    X = np.stack([human15_mean_pose()] * 3)
    R = random_rotation(rng)
    moved = 1.7 * R @ X + np.array([1.0, 2.0, 3.0])[:, None]
    write_poses(tmp_path / "gt.csv", X, sk.names)
    write_poses(tmp_path / "est.csv", moved, sk.names)
    assert run("evaluate", "--estimate", tmp_path / "est.csv", "--ground-truth", tmp_path / "gt.csv",
               "--out", tmp_path / "m.json") == 0
    m = read_json(tmp_path / "m.json")
    assert m["sequence_3d_error"] < 1e-9 and m["mean_mpjpe"] > 0.1
    assert run("evaluate", "--estimate", tmp_path / "est.csv", "--ground-truth", tmp_path / "gt.csv",
               "--out", tmp_path / "r.json", "--no-scale-align") == 0
    r = read_json(tmp_path / "r.json")
    assert r["alignment"] == "rigid" and r["sequence_3d_error"] > 0.01


def test_evaluate_known_offset(tmp_path, capsys):
    # two frames, three joints; the estimate is offset only in joint 0 by (0, 3, 4)
    names = ["a", "b", "c"]
    gt = np.array([[[0, 1, 0], [0, 0, 1], [0, 0, 0]]] * 2, dtype=float)
    est = gt.copy()
    est[:, 1, 0] += 3
    est[:, 2, 0] += 4
    write_poses(tmp_path / "gt.csv", gt, names)
    write_poses(tmp_path / "est.csv", est, names)
    assert run("evaluate", "--estimate", tmp_path / "est.csv", "--ground-truth", tmp_path / "gt.csv") == 0
    m = json.loads(capsys.readouterr().out)
    assert m["mean_mpjpe"] == pytest.approx(5 / 3)


def test_evaluate_mismatch(tmp_path, capsys):
    names = ["a", "b", "c"]
    write_poses(tmp_path / "gt.csv", np.zeros((2, 3, 3)), names)
    write_poses(tmp_path / "est.csv", np.zeros((3, 3, 3)), names)
    assert run("evaluate", "--estimate", tmp_path / "est.csv", "--ground-truth", tmp_path / "gt.csv") == 1
    write_poses(tmp_path / "est.csv", np.zeros((2, 3, 3)), ["a", "b", "d"])
    assert run("evaluate", "--estimate", tmp_path / "est.csv", "--ground-truth", tmp_path / "gt.csv") == 1
    assert "'d'" in capsys.readouterr().err


def test_export_rest_pose_wireframe(tmp_path):
    sk = human15_skeleton()
    write_skeleton(tmp_path / "s.skel", sk)
    write_poses(tmp_path / "rest.csv", human15_mean_pose(), sk.names)
    assert run("export-plot", "--poses", tmp_path / "rest.csv", "--skeleton", tmp_path / "s.skel",
               "--out-dir", tmp_path / "plot", "--no-series") == 0
    svg = (tmp_path / "plot" / "frame_0000.svg").read_text()
    assert len(re.findall(r"<line ", svg)) == sk.num_bones


def test_export_series_and_trajectory(golden):
    assert _reconstruct(golden) == 0
    assert run("export-plot", "--poses", golden / "out.csv", "--skeleton", golden / "skeleton.skel",
               "--out-dir", golden / "plot", "--frames", "all") == 0
    diag = read_json(golden / "out.csv.diagnostics.json")
    rows = (golden / "plot" / "convergence.csv").read_text().strip().splitlines()
    assert len(rows) - 1 == diag["outer_iterations"]
    assert len(list((golden / "plot").glob("frame_*.svg"))) == 30
    traj, _, _ = read_poses(golden / "plot" / "trajectory.csv")
    src, _, _ = read_poses(golden / "out.csv")
    assert traj.tobytes() == src.tobytes()
    vals = [float(r.split(",")[1]) for r in rows[1:]]
    assert vals == diag["reprojection_error"]


def test_export_missing_diagnostics(golden, capsys):
    assert _reconstruct(golden) == 0
    (golden / "out.csv.diagnostics.json").unlink()
    assert run("export-plot", "--poses", golden / "out.csv", "--skeleton", golden / "skeleton.skel",
               "--out-dir", golden / "plot") == 1
    assert "missing diagnostics" in capsys.readouterr().err
    assert not (golden / "plot").exists()


def test_export_bad_frames(golden):
    assert _reconstruct(golden) == 0
    assert run("export-plot", "--poses", golden / "out.csv", "--skeleton", golden / "skeleton.skel",
               "--out-dir", golden / "plot", "--frames", "99") == 1


def test_convert_mocap(tmp_path):
    (tmp_path / "t.asf").write_text(asf_text())
    (tmp_path / "t.amc").write_text(amc_text([{"root": [0, 0, 0, 0, 0, 0]}] * 4))
    assert run("convert-mocap", "--asf", tmp_path / "t.asf", "--amc", tmp_path / "t.amc",
               "--out", tmp_path / "p.csv", "--every", 2, "--write-skeleton", tmp_path / "h.skel") == 0
    poses, names, meta = read_poses(tmp_path / "p.csv", human15_skeleton().names)
    assert poses.shape == (2, 3, 15) and meta["units"] == "mm"
    assert (tmp_path / "h.skel").exists()
    assert run("convert-mocap", "--asf", tmp_path / "nope.asf", "--amc", tmp_path / "t.amc",
               "--out", tmp_path / "q.csv") == 1


def test_module_entry_point():
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "kcs", "--version"], capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.startswith("kcs ")
