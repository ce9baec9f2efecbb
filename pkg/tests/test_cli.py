import json
import os

import pytest

from partgrasp.cli import main
from partgrasp.fixtures import DEFAULT_CAMERA, SceneSpec, generate_scene, save_scene


@pytest.fixture(scope="module")
def scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli") / "knife"
    spec = SceneSpec(name="knife", object_kind="knife", task="cut the vegetables")
    save_scene(generate_scene(spec, DEFAULT_CAMERA, seed=4), str(d))
    return str(d)


class TestRunCommand:
    def test_successful_run_exit_zero(self, scene_dir, capsys):
        code = main(["run", "--scene", scene_dir, "--task", "cut the vegetables"])
        out = capsys.readouterr().out
        assert code == 0
        assert "selected grasp" in out
        assert "object: knife" in out

    def test_report_and_heatmap_written(self, scene_dir, tmp_path):
        out = tmp_path / "artifacts"
        code = main(
            ["run", "--scene", scene_dir, "--task", "cut the vegetables", "--out", str(out)]
        )
        assert code == 0
        report = json.loads((out / "report.json").read_text())
        assert report["failure_class"] is None
        assert (out / "heatmap.png").exists()

    def test_failure_class_exit_four(self, scene_dir, tmp_path):
        # empty grasps file -> no-candidates
        empty = tmp_path / "scene"
        import shutil

        shutil.copytree(scene_dir, empty)
        (empty / "grasps.json").write_text("[]")
        code = main(["run", "--scene", str(empty), "--task", "cut the vegetables"])
        assert code == 4

    def test_missing_scene_usage_error(self, tmp_path):
        code = main(["run", "--scene", str(tmp_path / "nope"), "--task", "x"])
        assert code == 2

    def test_unreachable_server_exit_three(self, scene_dir):
        code = main(
            [
                "run",
                "--scene",
                scene_dir,
                "--task",
                "cut the vegetables",
                "--server",
                "http://127.0.0.1:1",
            ]
        )
        assert code == 3

    def test_missing_required_flag_exit_two(self):
        assert main(["run", "--task", "x"]) == 2


class TestHeatmapCommand:
    def test_writes_png_and_sidecar(self, scene_dir, tmp_path):
        out = tmp_path / "hm.png"
        code = main(
            ["heatmap", "--scene", scene_dir, "--task", "cut the vegetables", "--out", str(out)]
        )
        assert code == 0
        assert out.exists()
        assert (tmp_path / "hm.json").exists()

    def test_decomposition_failure_exit_four(self, scene_dir, tmp_path):
        out = tmp_path / "hm.png"
        code = main(
            ["heatmap", "--scene", scene_dir, "--task", "unknown task", "--out", str(out)]
        )
        assert code == 4
        assert not out.exists()


class TestGenFixturesAndEval:
    def test_gen_then_eval(self, tmp_path, capsys):
        suite = tmp_path / "suite"
        code = main(["gen-fixtures", "--out", str(suite), "--seed", "0"])
        assert code == 0
        scene_dirs = [
            root for root, _d, files in os.walk(suite) if "expected.json" in files
        ]
        assert len(scene_dirs) >= 17
        capsys.readouterr()

        code = main(["eval", "--suite", str(suite)])
        out = capsys.readouterr().out
        assert code == 0
        assert "part selection: 100.0%" in out
        assert "winner agreement: 100.0%" in out
        assert "[clutter]" in out and "[tabletop]" in out

    def test_eval_empty_suite_exit_two(self, tmp_path):
        assert main(["eval", "--suite", str(tmp_path)]) == 2
