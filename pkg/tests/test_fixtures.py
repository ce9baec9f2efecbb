import hashlib
import json
import os

import numpy as np
import pytest

from partgrasp.errors import SceneGenerationError, UsageError
from partgrasp.fixtures import (
    Box,
    CylinderY,
    DEFAULT_CAMERA,
    ExpectedOutcome,
    SceneSpec,
    evaluate_part_selection,
    generate_scene,
    load_scene,
    mask_coverage,
    render,
    save_scene,
)
from partgrasp.model import PartSegment
from partgrasp.segmentation import SegmentationResult

from conftest import rect_mask


def dir_digest(path):
    """Stable digest over every file's relative path + bytes."""
    h = hashlib.sha256()
    for root, _dirs, files in sorted(os.walk(path)):
        for name in sorted(files):
            full = os.path.join(root, name)
            h.update(os.path.relpath(full, path).encode())
            with open(full, "rb") as f:
                h.update(f.read())
    return h.hexdigest()


class TestRender:
    def test_box_mask_count_matches_projected_area(self):
        # 0.2 m box centered 1 m ahead: front face at z = 0.9
        box = Box((-0.1, -0.1, 0.9), (0.1, 0.1, 1.1), "box")
        depth_mm, labels = render([box], 1.6, 640, 480, DEFAULT_CAMERA)
        count = int((labels == 0).sum())
        z = 0.9
        expected = (500.0 * 0.2 / z) * (500.0 * 0.2 / z)
        assert abs(count - expected) / expected < 0.02

    def test_box_depth_value(self):
        box = Box((-0.1, -0.1, 0.9), (0.1, 0.1, 1.1), "box")
        depth_mm, labels = render([box], 1.6, 640, 480, DEFAULT_CAMERA)
        assert depth_mm[240, 320] == 900
        assert depth_mm[0, 0] == 1600

    def test_cylinder_silhouette_width(self):
        cyl = CylinderY(0.0, 1.0, -0.1, 0.1, 0.05, "cyl")
        _, labels = render([cyl], 1.6, 640, 480, DEFAULT_CAMERA)
        cols = np.nonzero((labels == 0).any(axis=0))[0]
        # silhouette spans roughly 2*r*fx/z_tangent pixels
        width = cols.max() - cols.min() + 1
        assert abs(width - 2 * 0.05 * 500.0 / 1.0) < 4

    def test_nearer_primitive_wins(self):
        far = Box((-0.1, -0.1, 1.0), (0.1, 0.1, 1.2), "far")
        near = Box((-0.05, -0.05, 0.5), (0.05, 0.05, 0.6), "near")
        _, labels = render([far, near], 1.6, 640, 480, DEFAULT_CAMERA)
        assert labels[240, 320] == 1


@pytest.fixture(scope="module")
def knife_fixture():
    spec = SceneSpec(name="knife-test", object_kind="knife", task="cut the vegetables")
    return generate_scene(spec, DEFAULT_CAMERA, seed=1)


class TestGenerateScene:

    def test_parts_partition_object(self, knife_fixture):
        handle = knife_fixture.ground_truth_masks["handle"].to_array().astype(bool)
        blade = knife_fixture.ground_truth_masks["blade"].to_array().astype(bool)
        knife = knife_fixture.ground_truth_masks["knife"].to_array().astype(bool)
        assert not (handle & blade).any()
        assert np.array_equal(handle | blade, knife)

    def test_masked_pixels_have_valid_depth(self, knife_fixture):
        knife = knife_fixture.ground_truth_masks["knife"].to_matrix().astype(bool)
        depth = knife_fixture.frame.depth_mm
        assert (depth[knife] > 0).all()
        # background carries the backplane depth
        assert (depth[~knife] == 1600).all()

    def test_candidate_per_part_with_unique_ids(self, knife_fixture):
        assert len(knife_fixture.candidates) == 2
        ids = [c.id for c in knife_fixture.candidates]
        assert len(set(ids)) == len(ids)

    def test_expected_outcome_authored(self, knife_fixture):
        exp = knife_fixture.expected
        assert exp.task == "cut the vegetables"
        assert exp.expected_part_labels == ("handle",)
        assert exp.expected_winner_id is not None

    def test_determinism_byte_identical(self, tmp_path):
        spec = SceneSpec(name="pan-det", object_kind="pan", task="fry an egg")
        a = generate_scene(spec, DEFAULT_CAMERA, seed=3)
        b = generate_scene(spec, DEFAULT_CAMERA, seed=3)
        dir_a = tmp_path / "a"
        dir_b = tmp_path / "b"
        save_scene(a, str(dir_a))
        save_scene(b, str(dir_b))
        assert dir_digest(dir_a) == dir_digest(dir_b)

    def test_save_load_round_trip(self, tmp_path, knife_fixture):
        save_scene(knife_fixture, str(tmp_path / "scene"))
        loaded = load_scene(str(tmp_path / "scene"))
        assert loaded.ground_truth_masks == knife_fixture.ground_truth_masks
        assert np.array_equal(loaded.frame.depth_mm, knife_fixture.frame.depth_mm)
        assert np.array_equal(loaded.frame.color, knife_fixture.frame.color)
        assert loaded.decomposition_table == knife_fixture.decomposition_table
        assert loaded.expected == knife_fixture.expected
        assert len(loaded.candidates) == len(knife_fixture.candidates)
        for lc, kc in zip(loaded.candidates, knife_fixture.candidates):
            assert lc.id == kc.id
            assert np.allclose(lc.translation, kc.translation)

    def test_out_of_frustum_rejected(self):
        spec = SceneSpec(
            name="gone",
            object_kind="knife",
            task="cut the vegetables",
            center=(5.0, 0.0, 0.75),
        )
        with pytest.raises(SceneGenerationError):
            generate_scene(spec, DEFAULT_CAMERA, seed=0)

    def test_depth_jitter_stays_deterministic(self):
        spec = SceneSpec(
            name="jit",
            object_kind="bottle",
            task="shake the bottle",
            depth_jitter_mm=2.0,
        )
        a = generate_scene(spec, DEFAULT_CAMERA, seed=9)
        b = generate_scene(spec, DEFAULT_CAMERA, seed=9)
        c = generate_scene(spec, DEFAULT_CAMERA, seed=10)
        assert np.array_equal(a.frame.depth_mm, b.frame.depth_mm)
        assert not np.array_equal(a.frame.depth_mm, c.frame.depth_mm)


class TestOcclusion:
    @pytest.mark.parametrize("fraction", [0.2, 0.4, 0.6])
    def test_occlusion_fraction_achieved(self, fraction):
        spec = SceneSpec(
            name=f"occ{fraction}",
            object_kind="knife",
            task="cut the vegetables",
            occlusion_fraction=fraction,
        )
        free = generate_scene(
            SceneSpec(name="free", object_kind="knife", task="cut the vegetables"),
            DEFAULT_CAMERA,
            seed=0,
        )
        occluded = generate_scene(spec, DEFAULT_CAMERA, seed=0)
        full = free.ground_truth_masks["handle"].pixel_count()
        visible = occluded.ground_truth_masks["handle"].pixel_count()
        achieved = 1.0 - visible / full
        assert abs(achieved - fraction) < 0.03

    def test_occluded_masks_reflect_visible_region_only(self):
        spec = SceneSpec(
            name="occ-vis",
            object_kind="pan",
            task="fry an egg",
            occlusion_fraction=0.5,
        )
        fixture = generate_scene(spec, DEFAULT_CAMERA, seed=0)
        handle = fixture.ground_truth_masks["handle"].to_matrix().astype(bool)
        # every ground-truth pixel must carry the part's own depth, not the occluder's
        depth = fixture.frame.depth_mm[handle]
        assert (depth >= 700).all()  # occluder sits at < 0.56 m


class TestEvaluate:
    class FakeReport:
        def __init__(self, decomposition, segmentation):
            self.decomposition = decomposition
            self.segmentation = segmentation

    @pytest.fixture
    def fixture(self):
        spec = SceneSpec(name="ev", object_kind="knife", task="cut the vegetables")
        return generate_scene(spec, DEFAULT_CAMERA, seed=0)

    def _report(self, fixture, mask=None, labels=("handle",)):
        from partgrasp.model import PartDecomposition

        segs = []
        for label in labels:
            m = mask if mask is not None else fixture.ground_truth_masks[label]
            segs.append(PartSegment(label=label, mask=m, confidence=0.9))
        decomposition = PartDecomposition(
            object_name="knife",
            desirable_parts=tuple(labels),
            undesirable_parts=(),
        )
        segmentation = SegmentationResult(
            object_segment=PartSegment(
                label="knife", mask=fixture.ground_truth_masks["knife"], confidence=0.9
            ),
            part_segments=tuple(segs),
        )
        return self.FakeReport(decomposition, segmentation)

    def test_identical_mask_succeeds(self, fixture):
        verdict = evaluate_part_selection(self._report(fixture), fixture)
        assert verdict.success
        assert verdict.coverage == {"handle": 1.0}

    def test_missing_coverage_fails(self, fixture):
        truth = fixture.ground_truth_masks["handle"].to_matrix()
        partial = truth.copy()
        vs, us = np.nonzero(partial)
        drop = len(us) // 10  # remove 10% of truth pixels
        partial[vs[:drop], us[:drop]] = 0
        from partgrasp.model import encode_mask

        mask = encode_mask(partial, fixture.frame.width, fixture.frame.height)
        verdict = evaluate_part_selection(self._report(fixture, mask=mask), fixture)
        assert not verdict.success
        assert verdict.coverage["handle"] < 1.0

    def test_wrong_labels_fail(self, fixture):
        verdict = evaluate_part_selection(
            self._report(fixture, labels=("blade",)), fixture
        )
        assert not verdict.success
        assert not verdict.label_match

    def test_requires_expected(self, fixture):
        from dataclasses import replace

        bare = replace(fixture, expected=None)
        with pytest.raises(UsageError):
            evaluate_part_selection(self._report(fixture), bare)


class TestExpectedOutcome:
    def test_coverage_bounds(self):
        with pytest.raises(UsageError):
            ExpectedOutcome(task="t", expected_part_labels=("a",), min_part_coverage=0.0)

    def test_round_trip(self):
        e = ExpectedOutcome(
            task="cut", expected_part_labels=("handle",), expected_winner_id=1
        )
        assert ExpectedOutcome.from_json(e.to_json()) == e


def test_mask_coverage_arithmetic():
    truth = rect_mask(10, 10, 0, 0, 4, 4)
    half = rect_mask(10, 10, 0, 0, 4, 2)
    assert mask_coverage(half, truth) == 0.5
    assert mask_coverage(truth, truth) == 1.0
