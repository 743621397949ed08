"""End-to-end tests of the command line interface and its exit codes."""
import json
import subprocess
import sys

import numpy as np
import pytest

from imanifold import io
from imanifold.cli import EXIT_INVALID, EXIT_OK, EXIT_STAGE, main


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def rendered(tmp_path):
    assert run("sample", "--topology", "circle", "--n", 30, "--out", tmp_path / "g.json") == EXIT_OK
    assert run("render", "--prism", 5, "--grid", tmp_path / "g.json", "--image-size", 32,
               "--distances", tmp_path / "d.csv", "--out", tmp_path / "imgs") == EXIT_OK
    return tmp_path


def test_exit_code_values():
    assert (EXIT_OK, EXIT_INVALID, EXIT_STAGE) == (0, 1, 2)


def test_sample_topologies(tmp_path):
    for topo, n in [("circle", 12), ("torus", 20), ("so3", 20), ("light", 12)]:
        assert run("sample", "--topology", topo, "--n", 12, "--n-phi", 4, "--n-psi", 5, "--n-sphere", 4,
                   "--out", tmp_path / f"{topo}.json") == EXIT_OK
        assert io.read_grid(tmp_path / f"{topo}.json").n == n


def test_render_outputs(rendered):
    assert io.read_image_set(rendered / "imgs").shape == (30, 32, 32)
    assert io.read_matrix_csv(rendered / "d.csv").shape == (30, 30)


def test_embed_smooth_shape_pca(rendered, capsys):
    t = rendered
    assert run("embed", "--in", t / "d.csv", "--grid", t / "g.json", "--dim", 3, "--out", t / "a.csv") == EXIT_OK
    assert run("embed", "--in", t / "d.csv", "--grid", t / "g.json", "--dim", 3, "--seed", 4,
               "--out", t / "b.csv") == EXIT_OK
    assert json.loads((t / "a.json").read_text())["seed"] == 0
    assert run("smooth", "--in", t / "a.csv", "--grid", t / "g.json", "--steps", 2, "--out", t / "s.csv") == EXIT_OK
    assert run("shape-dist", "--a", t / "a.csv", "--b", t / "b.csv", "--grid", t / "g.json",
               "--out", t / "sd.json") == EXIT_OK
    assert json.loads((t / "sd.json").read_text())["distance"] < 0.2
    assert run("shape-dist", "--a", t / "a.csv", "--b", t / "b.csv", "--free") == EXIT_OK
    assert "rmse" in json.loads(capsys.readouterr().out)
    assert run("pca", "--in", t / "a.csv", t / "s.csv", "--out", t / "p.csv") == EXIT_OK
    assert len((t / "p.csv").read_text().splitlines()) == 61


def test_embed_vectors(tmp_path):
    io.write_matrix_csv(tmp_path / "x.csv", np.random.default_rng(0).normal(size=(25, 4)))
    for method in ("isomap", "le", "lle"):
        assert run("embed", "--method", method, "--vectors", "--knn", 6, "--dim", 2,
                   "--in", tmp_path / "x.csv", "--out", tmp_path / f"{method}.csv") == EXIT_OK
    assert run("embed", "--method", "le", "--in", tmp_path / "x.csv", "--out", tmp_path / "e.csv") == EXIT_INVALID


def test_invariance_and_joint(rendered):
    t = rendered
    assert run("invariance", "--in", t / "d.csv", "--grid", t / "g.json", "--n-seeds", 2, "--n-perms", 1,
               "--dim", 3, "--out", t / "inv.csv") == EXIT_OK
    assert io.read_labeled_matrix_csv(t / "inv.csv")[1] == ["seed0", "seed1", "perm0"]
    assert run("joint", "--prism", 4, 6, "--grid", t / "g.json", "--image-size", 32, "--dim", 3,
               "--out", t / "joint") == EXIT_OK
    assert io.read_matrix_csv(t / "joint" / "object1.csv").shape == (30, 3)


def test_simulate(tmp_path, capsys):
    assert run("simulate", "--case", "double_saddle", "--target-dim", 20, "--out", tmp_path / "sim") == EXIT_OK
    assert io.read_matrix_csv(tmp_path / "sim" / "points.csv").shape == (500, 20)


def test_run_config(tmp_path):
    cfg = {"kind": "so2", "objects": [4, 5], "output_dir": str(tmp_path / "o"), "grid": {"n": 20},
           "embedding": {"seed": 0, "d": 2}, "render": {"image_size": 32}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("run", "--config", tmp_path / "c.json") == EXIT_OK
    assert (tmp_path / "o" / "manifest.json").exists()


def test_stage_failure_exit_two(tmp_path):
    cfg = {"kind": "so2", "objects": [str(tmp_path / "nope.obj")], "output_dir": str(tmp_path / "o"),
           "grid": {"n": 20}, "embedding": {"seed": 0, "d": 2}}
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    assert run("run", "--config", tmp_path / "c.json") == EXIT_STAGE
    assert (tmp_path / "o" / "FAILED").exists()


@pytest.mark.parametrize("argv", [
    ["sample", "--topology", "circle", "--n", "2", "--out", "x.json"],
    ["embed", "--in", "/nonexistent.csv", "--out", "x.csv"],
    ["run", "--config", "/nonexistent.json"],
])
def test_invalid_input_exit_one(tmp_path, argv):
    assert main([a if not a.endswith((".json", ".csv")) or a.startswith("/") else str(tmp_path / a)
                 for a in argv]) == EXIT_INVALID


def test_missing_seed_config(tmp_path):
    (tmp_path / "c.json").write_text(json.dumps({"kind": "so2", "objects": [4], "output_dir": "o",
                                                 "embedding": {"d": 2}}))
    assert run("run", "--config", tmp_path / "c.json") == EXIT_INVALID


def test_usage_error_exit_one():
    with pytest.raises(SystemExit) as info:
        main(["sample", "--topology", "klein"])
    assert info.value.code == EXIT_INVALID


def test_console_entry(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "imanifold.cli", "sample", "--topology", "light", "--n", "8",
                           "--out", str(tmp_path / "l.json")], capture_output=True)
    assert proc.returncode == 0
    assert io.read_grid(tmp_path / "l.json").topology == "light"
