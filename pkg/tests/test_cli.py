import csv
import json
import shutil
import subprocess

import numpy as np
import pytest

from sdfit import io
from sdfit.cli import main


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("scenes") / "planes"
    assert main(["synth", "--model", "homography", "--structures", "2", "--seed", "3",
                 "--output", str(out)]) == 0
    return out


def test_synth_outputs(scene_dir, tmp_path):
    names = sorted(p.name for p in scene_dir.iterdir())
    assert names == ["correspondences.txt", "gt.labels", "image.png", "scene.json"]
    again = tmp_path / "again"
    main(["synth", "--model", "homography", "--structures", "2", "--seed", "3",
          "--output", str(again)])
    for name in names:
        assert (scene_dir / name).read_bytes() == (again / name).read_bytes()
    meta = json.loads((scene_dir / "scene.json").read_text())
    assert meta["structures"] == 2 and len(meta["models"]) == 2


def test_fit_and_eval(scene_dir, tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["fit", str(scene_dir / "correspondences.txt"), "--image",
                 str(scene_dir / "image.png"), "--structures", "2", "--output", str(out)])
    assert code == 0
    res = json.loads(out.read_text())
    assert len(res["models"]) == 2 and res["error"] <= 5.0
    assert set(res["timings"]) >= {"load", "segment", "update", "total"}
    io.write_labels(tmp_path / "pred", res["labels"])
    capsys.readouterr()
    assert main(["eval", str(tmp_path / "pred"), str(scene_dir / "gt.labels")]) == 0
    assert capsys.readouterr().out.strip() == f"{res['error']:.2f}"
    assert main(["eval", str(scene_dir / "gt.labels"), str(scene_dir / "gt.labels")]) == 0
    assert capsys.readouterr().out.strip() == "0.00"


def test_fit_to_stdout(scene_dir, capsys):
    main(["fit", str(scene_dir / "correspondences.txt"), "--image",
          str(scene_dir / "image.png"), "--structures", "2", "--threads", "2"])
    res = json.loads(capsys.readouterr().out)
    assert res["config"]["structures"] == 2


def small_problem(tmp_path, n):
    rng = np.random.default_rng(0)
    p1 = rng.uniform(0, 19, (n, 2))
    with open(tmp_path / "c.txt", "w") as fh:
        for (x, y) in p1:
            fh.write(f"{x} {y} {x + 2} {y} 1\n")
    io.write_label_map(tmp_path / "m.csv", np.zeros((20, 20), int))
    return [str(tmp_path / "c.txt"), "--labels", str(tmp_path / "m.csv")]


def test_exit_deficit(tmp_path, capsys):
    assert main(["fit", *small_problem(tmp_path, 12), "--structures", "2"]) == 2
    assert len(json.loads(capsys.readouterr().out)["models"]) == 1


def test_exit_no_hypotheses(tmp_path):
    assert main(["fit", *small_problem(tmp_path, 5)]) == 3


def test_exit_errors(tmp_path, scene_dir):
    assert main(["fit", str(tmp_path / "missing.txt"), "--image",
                 str(scene_dir / "image.png")]) == 1
    (tmp_path / "bad.txt").write_text("1 2 3\n")
    assert main(["fit", str(tmp_path / "bad.txt"), "--image", str(scene_dir / "image.png")]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["fit", "--model", "affine", "x"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["fit", str(tmp_path / "bad.txt")])
    assert exc.value.code not in (0, 2, 3)


@pytest.mark.parametrize("suffix", [".csv", ".pgm"])
def test_segment(scene_dir, tmp_path, suffix):
    out = tmp_path / f"sp{suffix}"
    assert main(["segment", str(scene_dir / "image.png"), "--superpixels", "60",
                 "--output", str(out)]) == 0
    lab = io.read_label_map(out)
    assert lab.shape == (480, 640)
    side = json.loads(out.with_suffix(".json").read_text())
    assert side["M_requested"] == 60 and side["M_actual"] == lab.max() + 1
    assert side["S"] == pytest.approx(np.sqrt(480 * 640 / 60))


@pytest.mark.slow
def test_bench(scene_dir, tmp_path):
    out = tmp_path / "b.csv"
    assert main(["bench", str(scene_dir.parent), "--sdf-runs", "2", "--ransac-runs", "8",
                 "--ransac-iters", "30", "--output", str(out)]) == 0
    rows = list(csv.DictReader(out.open()))
    assert [r["method"] for r in rows] == ["SDF", "RANSAC"]
    sdf, ransac = rows
    assert float(sdf["std"]) == 0.0 and sdf["runs"] == "2"
    assert float(ransac["std"]) > 0.0 and ransac["runs"] == "8"


def test_console_script(tmp_path):
    exe = shutil.which("sdfit")
    if exe is None:
        pytest.skip("console script not installed")
    out = tmp_path / "s"
    proc = subprocess.run([exe, "synth", "--structures", "1", "--inliers", "20",
                           "--output", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "correspondences.txt").exists()
