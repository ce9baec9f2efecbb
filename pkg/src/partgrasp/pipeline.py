"""End-to-end orchestration: decompose -> segment -> cloud -> heatmap -> rank.

A failed stage never raises past the pipeline unless the failure is
environmental (remote backend unreachable).  Everything else is folded into
the report as one of five mutually exclusive failure classes:

    decomposition-failure   language backend reply malformed or unusable
    segmentation-failure    segmentation reply violated the wire contract
    no-object-segment       whole-object query produced nothing
    empty-cloud             object mask holds no valid depth
    no-candidates           grasp generator proposed nothing usable

Reports are deterministic byte-for-byte with fixture backends once the
timing fields are dropped.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field, replace

import requests

from .decomposition import DecompositionBackendConfig, decompose
from .errors import (
    BackendUnavailableError,
    EmptyCloudError,
    InvalidDecompositionError,
    MalformedCandidateError,
    MalformedDecompositionError,
    MalformedSegmentationError,
    NoObjectSegmentError,
    UsageError,
)
from .fixtures import SceneFixture, evaluate_part_selection, load_scene
from .geometry import extract_object_cloud
from .heatmap import HeatmapParams, compose, export, finalize
from .imaging import encode_png_gray16, to_b64
from .model import GraspCandidate, PartDecomposition, RankedGrasp, TaskRequest
from .protocol import parse_candidates_payload
from .ranking import RankingConfig, rank
from .segmentation import SegmentationBackendConfig, SegmentationResult, segment

FAILURE_CLASSES = (
    "decomposition-failure",
    "segmentation-failure",
    "no-object-segment",
    "empty-cloud",
    "no-candidates",
)

SCENE_TOKEN = "{scene}"


@dataclass(frozen=True)
class CandidateSourceConfig:
    """Where grasp candidates come from: the scene's grasps.json, an explicit
    file, or a remote proposal service speaking the /grasps protocol."""

    kind: str = "file"
    path: str | None = None
    endpoint_url: str | None = None
    request_timeout: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("file", "remote"):
            raise UsageError(f"candidate source kind must be file|remote, got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint_url:
            raise UsageError("remote candidate source needs endpoint_url")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "path": self.path,
            "endpoint_url": self.endpoint_url,
            "request_timeout": self.request_timeout,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CandidateSourceConfig":
        return cls(
            kind=str(d.get("kind", "file")),
            path=d.get("path"),
            endpoint_url=d.get("endpoint_url"),
            request_timeout=float(d.get("request_timeout", 60.0)),
        )


@dataclass(frozen=True)
class PipelineConfig:
    decomposition: DecompositionBackendConfig
    segmentation: SegmentationBackendConfig
    heatmap: HeatmapParams = HeatmapParams()
    ranking: RankingConfig = RankingConfig()
    candidates: CandidateSourceConfig = CandidateSourceConfig()

    def to_json(self) -> dict:
        return {
            "decomposition": self.decomposition.to_json(),
            "segmentation": self.segmentation.to_json(),
            "heatmap": self.heatmap.to_json(),
            "ranking": self.ranking.to_json(),
            "candidates": self.candidates.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PipelineConfig":
        return cls(
            decomposition=DecompositionBackendConfig.from_json(d["decomposition"]),
            segmentation=SegmentationBackendConfig.from_json(d["segmentation"]),
            heatmap=HeatmapParams.from_json(d.get("heatmap", {})),
            ranking=RankingConfig.from_json(d.get("ranking", {})),
            candidates=CandidateSourceConfig.from_json(d.get("candidates", {})),
        )

    def resolve(self, scene_dir: str) -> "PipelineConfig":
        """Substitute the {scene} token in fixture paths with the scene directory."""

        def sub(value: str | None) -> str | None:
            if value is None:
                return None
            return value.replace(SCENE_TOKEN, scene_dir.rstrip("/"))

        return PipelineConfig(
            decomposition=replace(
                self.decomposition, fixture_path=sub(self.decomposition.fixture_path)
            ),
            segmentation=replace(
                self.segmentation, fixture_dir=sub(self.segmentation.fixture_dir)
            ),
            heatmap=self.heatmap,
            ranking=self.ranking,
            candidates=replace(self.candidates, path=sub(self.candidates.path)),
        )


def default_config() -> PipelineConfig:
    """Fixture backends wired to the scene directory's own files."""
    return PipelineConfig(
        decomposition=DecompositionBackendConfig(
            kind="fixture", fixture_path=f"{SCENE_TOKEN}/decomposition.json"
        ),
        segmentation=SegmentationBackendConfig(
            kind="fixture", fixture_dir=f"{SCENE_TOKEN}/masks"
        ),
    )


def load_config(path: str) -> PipelineConfig:
    try:
        with open(path) as f:
            return PipelineConfig.from_json(json.load(f))
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise UsageError(f"cannot load config {path}: {exc}") from exc


@dataclass
class PipelineReport:
    """Everything one run produced, including partial results before a failure."""

    task: str
    object_hint: str | None = None
    decomposition: PartDecomposition | None = None
    segmentation: SegmentationResult | None = None
    heatmap_path: str | None = None
    ranked_grasps: list[RankedGrasp] = field(default_factory=list)
    selected_grasp: RankedGrasp | None = None
    failure_class: str | None = None
    warnings: list[str] = field(default_factory=list)
    timings_ms: dict[str, float] = field(default_factory=dict)

    def to_json(self, include_timings: bool = True) -> dict:
        d = {
            "task": self.task,
            "object_hint": self.object_hint,
            "decomposition": self.decomposition.to_json() if self.decomposition else None,
            "segmentation": self.segmentation.to_json() if self.segmentation else None,
            "heatmap_path": self.heatmap_path,
            "ranked_grasps": [r.to_json() for r in self.ranked_grasps],
            "selected_grasp": self.selected_grasp.to_json() if self.selected_grasp else None,
            "failure_class": self.failure_class,
            "warnings": list(self.warnings),
        }
        if include_timings:
            d["timings_ms"] = dict(self.timings_ms)
        return d

    def to_json_text(self, include_timings: bool = True) -> str:
        return json.dumps(self.to_json(include_timings), sort_keys=True, indent=2) + "\n"


class _StageClock:
    def __init__(self) -> None:
        self.timings: dict[str, float] = {}
        self._t0 = time.perf_counter()

    def lap(self, stage: str) -> None:
        now = time.perf_counter()
        self.timings[stage] = (now - self._t0) * 1000.0
        self._t0 = now


def _fetch_candidates_remote(
    fixture: SceneFixture, object_mask_runs: list[int], config: CandidateSourceConfig
) -> list[GraspCandidate]:
    body = {
        "depth_png16_b64": to_b64(encode_png_gray16(fixture.frame.depth_mm)),
        "intrinsics": fixture.frame.intrinsics.to_json(),
        "object_mask_rle": object_mask_runs,
    }
    url = config.endpoint_url.rstrip("/") + "/grasps"
    try:
        resp = requests.post(url, json=body, timeout=config.request_timeout)
    except requests.RequestException as exc:
        raise BackendUnavailableError(f"grasp endpoint unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise BackendUnavailableError(
            f"grasp endpoint returned {resp.status_code}: {resp.text[:200]}"
        )
    try:
        payload = resp.json()
    except ValueError as exc:
        raise MalformedCandidateError(f"grasp reply is not JSON: {exc}") from exc
    return parse_candidates_payload(payload)


def _try_decompose(
    report: PipelineReport, task: TaskRequest, config: DecompositionBackendConfig, clock
) -> PartDecomposition | None:
    try:
        decomposition = decompose(task, config)
    except (MalformedDecompositionError, InvalidDecompositionError) as exc:
        report.failure_class = "decomposition-failure"
        report.warnings.append(str(exc))
        decomposition = None
    clock.lap("decompose")
    report.decomposition = decomposition
    return decomposition


def _try_segment(
    report: PipelineReport,
    scene: SceneFixture,
    decomposition: PartDecomposition,
    config: SegmentationBackendConfig,
    clock,
) -> SegmentationResult | None:
    part_labels = list(decomposition.desirable_parts) + list(decomposition.undesirable_parts)
    try:
        seg_result = segment(scene.frame, decomposition.object_name, part_labels, config)
    except NoObjectSegmentError as exc:
        report.failure_class = "no-object-segment"
        report.warnings.append(str(exc))
        seg_result = None
    except MalformedSegmentationError as exc:
        report.failure_class = "segmentation-failure"
        report.warnings.append(str(exc))
        seg_result = None
    clock.lap("segment")
    report.segmentation = seg_result
    if seg_result is not None:
        for label in seg_result.missing_labels:
            report.warnings.append(f"no segment for part {label!r}; skipped in heatmap")
    return seg_result


def _compose_heatmap(
    scene: SceneFixture,
    decomposition: PartDecomposition,
    seg_result: SegmentationResult,
    params: HeatmapParams,
):
    desirable = [
        s for s in seg_result.part_segments if s.label in decomposition.desirable_parts
    ]
    undesirable = [
        s for s in seg_result.part_segments if s.label in decomposition.undesirable_parts
    ]
    raw = compose(
        (scene.frame.width, scene.frame.height),
        seg_result.object_segment,
        desirable,
        undesirable,
        params,
    )
    return finalize(raw, params)


def build_heatmap(
    scene: SceneFixture,
    task: TaskRequest,
    config: PipelineConfig,
    scene_dir: str | None = None,
):
    """Run only the stages needed for the heatmap: decompose, segment, compose.

    Returns (report, heatmap); heatmap is None when an early stage failed.
    """
    if scene_dir is not None:
        config = config.resolve(scene_dir)
    report = PipelineReport(task=task.task, object_hint=task.object_hint)
    clock = _StageClock()
    decomposition = _try_decompose(report, task, config.decomposition, clock)
    if decomposition is None:
        report.timings_ms = clock.timings
        return report, None
    seg_result = _try_segment(report, scene, decomposition, config.segmentation, clock)
    if seg_result is None:
        report.timings_ms = clock.timings
        return report, None
    heatmap = _compose_heatmap(scene, decomposition, seg_result, config.heatmap)
    clock.lap("heatmap")
    report.timings_ms = clock.timings
    return report, heatmap


def run_pipeline(
    scene: SceneFixture,
    task: TaskRequest,
    config: PipelineConfig,
    scene_dir: str | None = None,
    export_dir: str | None = None,
) -> PipelineReport:
    """Run the full pipeline on one scene.

    Stage order is fixed: decompose, segment, cloud, candidates, heatmap,
    rank; no stage reads a later stage's output.  BackendUnavailableError
    propagates (environmental); every modeled failure lands in the report.
    """
    report = _run_stages(scene, task, config, scene_dir, export_dir)
    if export_dir is not None:
        os.makedirs(export_dir, exist_ok=True)
        with open(os.path.join(export_dir, "report.json"), "w") as f:
            f.write(report.to_json_text())
    return report


def _run_stages(
    scene: SceneFixture,
    task: TaskRequest,
    config: PipelineConfig,
    scene_dir: str | None,
    export_dir: str | None,
) -> PipelineReport:
    if scene_dir is not None:
        config = config.resolve(scene_dir)
    report = PipelineReport(task=task.task, object_hint=task.object_hint)
    clock = _StageClock()

    # 1. part decomposition (depends only on the task text)
    decomposition = _try_decompose(report, task, config.decomposition, clock)
    if decomposition is None:
        report.timings_ms = clock.timings
        return report

    # 2. part localization (single batched query: object + all parts)
    seg_result = _try_segment(report, scene, decomposition, config.segmentation, clock)
    if seg_result is None:
        report.timings_ms = clock.timings
        return report

    # 3. object point cloud from masked depth
    try:
        cloud = extract_object_cloud(scene.frame, seg_result.object_segment.mask)
    except EmptyCloudError as exc:
        report.failure_class = "empty-cloud"
        report.warnings.append(str(exc))
        clock.lap("cloud")
        report.timings_ms = clock.timings
        return report
    clock.lap("cloud")

    # 4. grasp candidates (input artifact: scene file or remote generator)
    try:
        if config.candidates.kind == "remote":
            candidates = _fetch_candidates_remote(
                scene, list(seg_result.object_segment.mask.runs), config.candidates
            )
        elif config.candidates.path:
            with open(config.candidates.path) as f:
                candidates = parse_candidates_payload(json.load(f))
        else:
            candidates = list(scene.candidates)
    except (MalformedCandidateError, OSError, json.JSONDecodeError) as exc:
        report.failure_class = "no-candidates"
        report.warnings.append(f"unusable candidate source: {exc}")
        clock.lap("candidates")
        report.timings_ms = clock.timings
        return report
    clock.lap("candidates")

    # 5. heatmap composition + finalization
    heatmap = _compose_heatmap(scene, decomposition, seg_result, config.heatmap)
    if export_dir is not None:
        os.makedirs(export_dir, exist_ok=True)
        png_path = os.path.join(export_dir, "heatmap.png")
        export(heatmap, config.heatmap, png_path)
        report.heatmap_path = png_path
    clock.lap("heatmap")

    # 6. candidate scoring and selection
    ranked = rank(
        candidates,
        heatmap,
        cloud,
        scene.frame.intrinsics,
        config.ranking,
        warnings=report.warnings,
    )
    report.ranked_grasps = ranked
    if not ranked:
        report.failure_class = "no-candidates"
        report.warnings.append("grasp generator proposed no candidates")
        clock.lap("rank")
        report.timings_ms = clock.timings
        return report
    report.selected_grasp = ranked[0]
    clock.lap("rank")
    report.timings_ms = clock.timings
    return report


# ---------------------------------------------------------------------------
# suite evaluation


def discover_scenes(suite_dir: str) -> list[str]:
    """Scene directories (holding expected.json) under a suite root, sorted."""
    found: list[str] = []
    for root, _dirs, files in os.walk(suite_dir):
        if "expected.json" in files:
            found.append(root)
    return sorted(found)


def run_suite(suite_dir: str, config: PipelineConfig, export_dir: str | None = None) -> dict:
    """Evaluate every scene in a suite; returns aggregate metrics.

    Scenes are grouped by their directory one level below the suite root
    (e.g. tabletop/, clutter/); metrics report overall and per group.
    """
    scenes = discover_scenes(suite_dir)
    if not scenes:
        raise UsageError(f"no scenes with expected.json under {suite_dir}")
    per_scene: list[dict] = []
    timing_sums: dict[str, float] = {}
    for scene_dir in scenes:
        fixture = load_scene(scene_dir)
        rel = os.path.relpath(scene_dir, suite_dir)
        group = rel.split(os.sep)[0] if os.sep in rel else "main"
        task = TaskRequest(task=fixture.expected.task)
        scene_export = (
            os.path.join(export_dir, rel) if export_dir is not None else None
        )
        report = run_pipeline(
            fixture, task, config, scene_dir=scene_dir, export_dir=scene_export
        )
        verdict = evaluate_part_selection(report, fixture)
        winner_match = None
        if fixture.expected.expected_winner_id is not None:
            winner_match = (
                report.selected_grasp is not None
                and report.selected_grasp.candidate.id == fixture.expected.expected_winner_id
            )
        for stage, ms in report.timings_ms.items():
            timing_sums[stage] = timing_sums.get(stage, 0.0) + ms
        per_scene.append(
            {
                "scene": rel,
                "group": group,
                "task": fixture.expected.task,
                "part_selection": verdict.to_json(),
                "winner_match": winner_match,
                "failure_class": report.failure_class,
            }
        )

    def rate(rows: list[dict], key) -> float | None:
        vals = [key(r) for r in rows]
        vals = [v for v in vals if v is not None]
        if not vals:
            return None
        return sum(1 for v in vals if v) / len(vals)

    groups = sorted({r["group"] for r in per_scene})
    summary = {
        "suite_dir": suite_dir,
        "scene_count": len(per_scene),
        "part_selection_rate": rate(per_scene, lambda r: r["part_selection"]["success"]),
        "winner_agreement_rate": rate(per_scene, lambda r: r["winner_match"]),
        "groups": {
            g: {
                "scene_count": sum(1 for r in per_scene if r["group"] == g),
                "part_selection_rate": rate(
                    [r for r in per_scene if r["group"] == g],
                    lambda r: r["part_selection"]["success"],
                ),
                "winner_agreement_rate": rate(
                    [r for r in per_scene if r["group"] == g], lambda r: r["winner_match"]
                ),
            }
            for g in groups
        },
        "mean_stage_timings_ms": {
            stage: total / len(per_scene) for stage, total in sorted(timing_sums.items())
        },
        "scenes": per_scene,
    }
    if export_dir is not None:
        os.makedirs(export_dir, exist_ok=True)
        with open(os.path.join(export_dir, "suite_report.json"), "w") as f:
            json.dump(summary, f, sort_keys=True, indent=2)
            f.write("\n")
    return summary
