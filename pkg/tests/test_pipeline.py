import json
import os
import threading
from http.server import BaseHTTPRequestHandler, HTTPServer

import numpy as np
import pytest

from partgrasp.errors import BackendUnavailableError, UsageError
from partgrasp.fixtures import (
    DEFAULT_CAMERA,
    SceneSpec,
    generate_scene,
    load_scene,
    save_scene,
)
from partgrasp.model import TaskRequest
from partgrasp.pipeline import (
    PipelineConfig,
    CandidateSourceConfig,
    default_config,
    discover_scenes,
    run_pipeline,
    run_suite,
)
from partgrasp.segmentation import SegmentationBackendConfig
from partgrasp.decomposition import DecompositionBackendConfig


@pytest.fixture(scope="module")
def knife_scene_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("scenes") / "knife"
    spec = SceneSpec(name="knife", object_kind="knife", task="cut the vegetables")
    save_scene(generate_scene(spec, DEFAULT_CAMERA, seed=5), str(d))
    return str(d)


def winner_label(fixture, report):
    """Part label whose candidate won (candidates are ordered by sorted label)."""
    labels = sorted({p for p in fixture.ground_truth_masks if p != "knife"})
    return labels[report.selected_grasp.candidate.id]


class TestRunPipeline:
    def test_cut_task_selects_handle_candidate(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        report = run_pipeline(
            fixture,
            TaskRequest(task="cut the vegetables"),
            default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.failure_class is None
        assert report.decomposition.desirable_parts == ("handle",)
        assert report.selected_grasp is not None
        assert report.selected_grasp.candidate.id == fixture.expected.expected_winner_id
        assert winner_label(fixture, report) == "handle"
        # both lookups land on desirable pixels scaled to 255
        assert report.selected_grasp.total_score == 510.0

    def test_handover_task_flips_winner(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        report = run_pipeline(
            fixture,
            TaskRequest(task="hand over the knife"),
            default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.failure_class is None
        assert report.decomposition.desirable_parts == ("blade",)
        assert winner_label(fixture, report) == "blade"

    def test_selected_is_first_ranked(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        report = run_pipeline(
            fixture,
            TaskRequest(task="cut the vegetables"),
            default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.selected_grasp == report.ranked_grasps[0]

    def test_report_deterministic_modulo_timings(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        cfg = default_config()
        task = TaskRequest(task="cut the vegetables")
        a = run_pipeline(fixture, task, cfg, scene_dir=knife_scene_dir)
        b = run_pipeline(fixture, task, cfg, scene_dir=knife_scene_dir)
        assert a.to_json_text(include_timings=False) == b.to_json_text(include_timings=False)
        assert set(a.timings_ms) == {
            "decompose",
            "segment",
            "cloud",
            "candidates",
            "heatmap",
            "rank",
        }

    def test_heatmap_export(self, knife_scene_dir, tmp_path):
        fixture = load_scene(knife_scene_dir)
        out = tmp_path / "out"
        report = run_pipeline(
            fixture,
            TaskRequest(task="cut the vegetables"),
            default_config(),
            scene_dir=knife_scene_dir,
            export_dir=str(out),
        )
        assert os.path.exists(report.heatmap_path)
        assert os.path.exists(out / "heatmap.json")
        assert os.path.exists(out / "report.json")


class TestFailureTaxonomy:
    def test_empty_grasp_parts_is_decomposition_failure(self, knife_scene_dir, tmp_path):
        fixture = load_scene(knife_scene_dir)
        table = {"cut the vegetables": {"object": "knife", "grasp_parts": [], "avoid_parts": []}}
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(table))
        cfg = default_config()
        cfg = PipelineConfig(
            decomposition=DecompositionBackendConfig(kind="fixture", fixture_path=str(bad)),
            segmentation=cfg.segmentation,
        )
        report = run_pipeline(
            fixture, TaskRequest(task="cut the vegetables"), cfg, scene_dir=knife_scene_dir
        )
        assert report.failure_class == "decomposition-failure"
        assert report.decomposition is None

    def test_missing_object_mask_is_no_object_segment(self, knife_scene_dir, tmp_path):
        fixture = load_scene(knife_scene_dir)
        masks = tmp_path / "masks"
        masks.mkdir()
        # copy only part masks, drop the whole-object mask
        src = os.path.join(knife_scene_dir, "masks")
        for name in os.listdir(src):
            if name.startswith("knife."):
                continue
            (masks / name).write_bytes(open(os.path.join(src, name), "rb").read())
        cfg = PipelineConfig(
            decomposition=default_config().decomposition,
            segmentation=SegmentationBackendConfig(kind="fixture", fixture_dir=str(masks)),
        )
        report = run_pipeline(
            fixture, TaskRequest(task="cut the vegetables"), cfg, scene_dir=knife_scene_dir
        )
        assert report.failure_class == "no-object-segment"

    def test_invalid_depth_under_mask_is_empty_cloud(self, knife_scene_dir, tmp_path):
        fixture = load_scene(knife_scene_dir)
        # zero out depth beneath the object mask
        depth = np.array(fixture.frame.depth_mm)
        obj = fixture.ground_truth_masks["knife"].to_matrix().astype(bool)
        depth[obj] = 0
        from dataclasses import replace

        from partgrasp.model import RgbdFrame

        frame = RgbdFrame(
            width=fixture.frame.width,
            height=fixture.frame.height,
            color=fixture.frame.color,
            depth_mm=depth,
            intrinsics=fixture.frame.intrinsics,
        )
        broken = replace(fixture, frame=frame)
        report = run_pipeline(
            broken, TaskRequest(task="cut the vegetables"), default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.failure_class == "empty-cloud"

    def test_zero_candidates(self, knife_scene_dir, tmp_path):
        fixture = load_scene(knife_scene_dir)
        from dataclasses import replace

        empty = replace(fixture, candidates=())
        report = run_pipeline(
            empty, TaskRequest(task="cut the vegetables"), default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.failure_class == "no-candidates"
        assert report.ranked_grasps == []
        assert report.selected_grasp is None

    def test_backend_unavailable_propagates(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        cfg = PipelineConfig(
            decomposition=DecompositionBackendConfig(
                kind="remote",
                endpoint_url="http://127.0.0.1:1/v1/chat/completions",
                model_name="m",
                max_retries=0,
            ),
            segmentation=default_config().segmentation,
        )
        with pytest.raises(BackendUnavailableError):
            run_pipeline(
                fixture, TaskRequest(task="cut the vegetables"), cfg,
                scene_dir=knife_scene_dir,
            )

    def test_failure_classes_mutually_exclusive(self, knife_scene_dir):
        # a successful run has no failure class at all
        fixture = load_scene(knife_scene_dir)
        report = run_pipeline(
            fixture, TaskRequest(task="cut the vegetables"), default_config(),
            scene_dir=knife_scene_dir,
        )
        assert report.failure_class is None


class GraspStub:
    def __init__(self, payload):
        self.payload = payload
        self.requests = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def do_POST(self):
                length = int(self.headers["Content-Length"])
                stub.requests.append(
                    {"path": self.path, "body": json.loads(self.rfile.read(length))}
                )
                data = json.dumps(stub.payload).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def log_message(self, *args):
                pass

        self.server = HTTPServer(("127.0.0.1", 0), Handler)
        threading.Thread(target=self.server.serve_forever, daemon=True).start()

    @property
    def url(self):
        return f"http://127.0.0.1:{self.server.server_port}"

    def close(self):
        self.server.shutdown()
        self.server.server_close()


class TestRemoteCandidates:
    def test_remote_candidate_source(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        payload = {"candidates": [c.to_json() for c in fixture.candidates]}
        stub = GraspStub(payload)
        try:
            cfg = PipelineConfig(
                decomposition=default_config().decomposition,
                segmentation=default_config().segmentation,
                candidates=CandidateSourceConfig(kind="remote", endpoint_url=stub.url),
            )
            report = run_pipeline(
                fixture, TaskRequest(task="cut the vegetables"), cfg,
                scene_dir=knife_scene_dir,
            )
            assert report.failure_class is None
            body = stub.requests[0]["body"]
            assert stub.requests[0]["path"] == "/grasps"
            assert set(body) == {"depth_png16_b64", "intrinsics", "object_mask_rle"}
        finally:
            stub.close()

    def test_zero_remote_candidates(self, knife_scene_dir):
        fixture = load_scene(knife_scene_dir)
        stub = GraspStub({"candidates": []})
        try:
            cfg = PipelineConfig(
                decomposition=default_config().decomposition,
                segmentation=default_config().segmentation,
                candidates=CandidateSourceConfig(kind="remote", endpoint_url=stub.url),
            )
            report = run_pipeline(
                fixture, TaskRequest(task="cut the vegetables"), cfg,
                scene_dir=knife_scene_dir,
            )
            assert report.failure_class == "no-candidates"
        finally:
            stub.close()


@pytest.fixture(scope="module")
def small_suite(tmp_path_factory):
    suite = tmp_path_factory.mktemp("suite")
    scenes = [
        ("knife", "cut the vegetables", "tabletop"),
        ("knife", "hand over the knife", "tabletop"),
        ("pan", "fry an egg", "tabletop"),
        ("bottle", "pour a glass of water", "tabletop"),
        ("pan", "hand over the pan", "clutter"),
        ("bottle", "unscrew the cap", "clutter"),
    ]
    for kind, task, group in scenes:
        name = f"{kind}-{task.replace(' ', '-')}"
        frac = 0.3 if group == "clutter" else 0.0
        spec = SceneSpec(name=name, object_kind=kind, task=task, occlusion_fraction=frac)
        save_scene(
            generate_scene(spec, DEFAULT_CAMERA, seed=2), str(suite / group / name)
        )
    return str(suite)


class TestRunSuite:
    def test_all_correct_suite(self, small_suite):
        summary = run_suite(small_suite, default_config())
        assert summary["scene_count"] == 6
        assert summary["part_selection_rate"] == 1.0
        assert summary["winner_agreement_rate"] == 1.0
        assert set(summary["groups"]) == {"tabletop", "clutter"}
        assert summary["groups"]["clutter"]["part_selection_rate"] == 1.0

    def test_tampered_winner_lowers_agreement(self, small_suite, tmp_path):
        # copy the suite, flip one expected winner
        import shutil

        copy = tmp_path / "suite"
        shutil.copytree(small_suite, copy)
        scenes = discover_scenes(str(copy))
        victim = scenes[0]
        exp_path = os.path.join(victim, "expected.json")
        exp = json.loads(open(exp_path).read())
        exp["expected_winner_id"] = 99
        with open(exp_path, "w") as f:
            json.dump(exp, f)
        summary = run_suite(str(copy), default_config())
        assert summary["winner_agreement_rate"] == pytest.approx(5 / 6)

    def test_empty_suite_is_usage_error(self, tmp_path):
        with pytest.raises(UsageError):
            run_suite(str(tmp_path), default_config())

    def test_suite_report_written(self, small_suite, tmp_path):
        out = tmp_path / "reports"
        run_suite(small_suite, default_config(), export_dir=str(out))
        assert (out / "suite_report.json").exists()
