import numpy as np
import pytest

from tribench import experiments as ex
from tribench.cli import main, parse_levels
from tribench.geometry import project_many
from tribench.io import CSV_HEADER, export_scene, read_csv
from tribench.synthdata import make_box_scene, make_conf


@pytest.fixture
def exported(tmp_path):
    scene, pixels = ex.synth_trial_data(3, 0, 0)
    return export_scene(tmp_path / "scene", scene.cameras, pixels, scene.points)


def test_parse_levels():
    assert parse_levels("1:10") == [float(k) for k in range(1, 11)]
    assert parse_levels("0:1:0.5") == [0.0, 0.5, 1.0]
    assert parse_levels("2, 4,8") == [2.0, 4.0, 8.0]


def test_sensitivity_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    code = main(["sensitivity", "--conf", "2", "--kind", "distance", "--levels", "1:3", "--trials", "4",
                 "--methods", "midpoint,l2", "--out", str(out)])
    assert code == 0
    recs = read_csv(out)
    assert len(recs) == 3 * 4 * 2
    assert out.read_text().splitlines()[0] == ",".join(CSV_HEADER)
    assert "wrote 24 records" in capsys.readouterr().out
    direct = ex.run_sensitivity(2, "distance", [1.0, 2.0, 3.0], trials=4, methods=["midpoint", "l2"])
    assert sorted(r.value for r in recs) == sorted(r.value for r in direct)


def test_sfm_synth_command(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["sfm-synth", "--cameras", "3", "--trials", "2", "--out", str(out)]) == 0
    recs = read_csv(out)
    assert {r.method for r in recs} == set(ex.MULTI_VIEW_METHODS)
    assert all(r.experiment == "sfm-synth-3cam" for r in recs)


def test_sfm_real_command(tmp_path, exported):
    cams, corr, pts = exported
    out = tmp_path / "real.csv"
    code = main(["sfm-real", "--correspondences", str(corr), "--cameras-file", str(cams),
                 "--gt-points", str(pts), "--views", "3", "--runs", "2", "--points-per-run", "15",
                 "--out", str(out)])
    assert code == 0
    recs = read_csv(out)
    assert len(recs) == 2 * len(ex.MULTI_VIEW_METHODS)
    assert all(r.notes.startswith("cameras=0-1-2") for r in recs)


def test_triangulate_command(tmp_path, capsys):
    scene = make_box_scene(1, 2, 5)
    paths = export_scene(tmp_path / "exact", scene.cameras,
                         [project_many(c, scene.points) for c in scene.cameras], scene.points)
    assert main(["triangulate", "--cameras-file", str(paths[0]), "--observations", str(paths[1]),
                 "--method", "l2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 5
    for line, p in zip(lines, scene.points):
        pid, *xyz = line.split()
        np.testing.assert_allclose([float(v) for v in xyz], p, atol=1e-9)


def test_malformed_file_exit_2(tmp_path, exported, capsys):
    cams, _, _ = exported
    bad = tmp_path / "obs.txt"
    bad.write_text("0 0 320.0\n")
    assert main(["triangulate", "--cameras-file", str(cams), "--observations", str(bad)]) == 2
    assert "obs.txt:1" in capsys.readouterr().err
    bad.write_text("0 0 320 240\n0 9 300 200\n")
    assert main(["triangulate", "--cameras-file", str(cams), "--observations", str(bad)]) == 2


def test_unknown_method_exit_2(tmp_path, exported):
    cams, corr, _ = exported
    assert main(["triangulate", "--cameras-file", str(cams), "--observations", str(corr),
                 "--method", "angular-l1"]) == 2


def test_degenerate_input_exit_3(tmp_path, capsys):
    cam = make_conf(1)[0]
    scene_dir = tmp_path / "coincident"
    p = np.array([[0.0, 0.0, 0.0]])
    px = project_many(cam, p)
    cams, corr, _ = export_scene(scene_dir, [cam, cam], [px, px], p)
    assert main(["triangulate", "--cameras-file", str(cams), "--observations", str(corr)]) == 3
    assert "degenerate" in capsys.readouterr().err


def test_io_errors_exit_4(tmp_path, exported):
    _, corr, _ = exported
    missing = tmp_path / "missing.txt"
    assert main(["triangulate", "--cameras-file", str(missing), "--observations", str(corr)]) == 4
    out = tmp_path / "no" / "dir" / "x.csv"
    assert main(["sfm-synth", "--trials", "1", "--out", str(out)]) == 4
