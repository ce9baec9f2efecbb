"""Synthetic desk-scale scenes with ground truth: depth, masks, grasps, tables.

Objects are unions of axis-aligned primitives (boxes, vertical cylinders) in
the camera frame, depth-rendered by exact ray intersection against a constant
background plane.  Part masks fall out of the same analytic geometry, so a
scene is its own ground truth: masks partition the object, every masked pixel
has valid depth, and occluders carve away exactly the pixels they hide.

Grasp candidates are authored one per part: the contact point sits on the
part's most interior visible pixel and the approach axis runs along the
viewing ray, so the candidate's reprojections land on pixels whose heat is
known in advance.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import SceneGenerationError, UsageError
from .imaging import encode_png_rgb, read_pgm16, write_pgm16
from .model import (
    BinaryMask,
    CameraIntrinsics,
    GraspCandidate,
    PartSegment,
    RgbdFrame,
    encode_mask,
    matrix_to_quaternion,
)
from .segmentation import SegmentationResult

BACKGROUND_COLOR = (70, 70, 70)
PART_COLORS = [
    (204, 61, 61),
    (61, 133, 204),
    (61, 204, 112),
    (204, 172, 61),
    (140, 61, 204),
    (204, 61, 151),
    (61, 204, 196),
    (120, 120, 60),
]
OCCLUDER_LABEL = "crate"
GRASP_STANDOFF_M = 0.15
MIN_ANCHOR_EROSION = 2

OBJECT_CONFIDENCE = 0.99
PART_CONFIDENCES = {"handle": 0.97, "blade": 0.93, "body": 0.96, "cap": 0.91}

# task -> (desirable parts, undesirable parts), one table per object kind
TASK_TABLES: dict[str, dict[str, tuple[list[str], list[str]]]] = {
    "knife": {
        "cut the vegetables": (["handle"], ["blade"]),
        "hand over the knife": (["blade"], ["handle"]),
        "put the knife in the block": (["handle"], ["blade"]),
        "spread butter on the toast": (["handle"], ["blade"]),
    },
    "pan": {
        "fry an egg": (["handle"], ["body"]),
        "hand over the pan": (["body"], ["handle"]),
        "carry the pan to the sink": (["handle"], ["body"]),
        "hang the pan on the hook": (["body"], ["handle"]),
    },
    "bottle": {
        "pour a glass of water": (["body"], ["cap"]),
        "unscrew the cap": (["cap"], ["body"]),
        "hand over the bottle": (["body"], ["cap"]),
        "shake the bottle": (["body"], ["cap"]),
    },
}


# ---------------------------------------------------------------------------
# primitives + renderer


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in the camera frame; lo/hi are (x, y, z) corners in meters."""

    lo: tuple[float, float, float]
    hi: tuple[float, float, float]
    label: str

    def bounds(self):
        return np.array(self.lo), np.array(self.hi)

    def intersect(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        """First positive hit parameter t (with ray z = t) per pixel, inf when missed."""
        tmin = np.full(dx.shape, -np.inf)
        tmax = np.full(dx.shape, np.inf)
        for d, lo, hi in ((dx, self.lo[0], self.hi[0]), (dy, self.lo[1], self.hi[1])):
            with np.errstate(divide="ignore", invalid="ignore"):
                t0 = np.where(d != 0, lo / d, np.where((lo <= 0) & (0 <= hi), -np.inf, np.inf))
                t1 = np.where(d != 0, hi / d, np.where((lo <= 0) & (0 <= hi), np.inf, -np.inf))
            lo_t = np.minimum(t0, t1)
            hi_t = np.maximum(t0, t1)
            tmin = np.maximum(tmin, lo_t)
            tmax = np.minimum(tmax, hi_t)
        # z axis: ray z component is 1
        tmin = np.maximum(tmin, self.lo[2])
        tmax = np.minimum(tmax, self.hi[2])
        hit = (tmin <= tmax) & (tmin > 0)
        return np.where(hit, tmin, np.inf)


@dataclass(frozen=True)
class CylinderY:
    """Finite cylinder with vertical axis (camera +y); caps included."""

    center_x: float
    center_z: float
    y_lo: float
    y_hi: float
    radius: float
    label: str

    def bounds(self):
        lo = np.array([self.center_x - self.radius, self.y_lo, self.center_z - self.radius])
        hi = np.array([self.center_x + self.radius, self.y_hi, self.center_z + self.radius])
        return lo, hi

    def intersect(self, dx: np.ndarray, dy: np.ndarray) -> np.ndarray:
        cx, cz, r = self.center_x, self.center_z, self.radius
        a = dx * dx + 1.0
        b = -2.0 * (dx * cx + cz)
        c = cx * cx + cz * cz - r * r
        disc = b * b - 4.0 * a * c
        sqrt_disc = np.sqrt(np.maximum(disc, 0.0))
        best = np.full(dx.shape, np.inf)
        for sign in (-1.0, 1.0):
            t = (-b + sign * sqrt_disc) / (2.0 * a)
            y = t * dy
            ok = (disc >= 0) & (t > 0) & (y >= self.y_lo) & (y <= self.y_hi)
            best = np.where(ok & (t < best), t, best)
        # flat caps
        for y_cap in (self.y_lo, self.y_hi):
            with np.errstate(divide="ignore", invalid="ignore"):
                t = np.where(dy != 0, y_cap / dy, np.inf)
                x = t * dx
                z = t
                ok = (t > 0) & np.isfinite(t) & ((x - cx) ** 2 + (z - cz) ** 2 <= r * r)
            best = np.where(ok & (t < best), t, best)
        return best


Primitive = Box | CylinderY


def render(
    primitives: list[Primitive],
    background_z: float,
    width: int,
    height: int,
    intrinsics: CameraIntrinsics,
    jitter_mm: float = 0.0,
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Ray-cast every pixel center; returns (depth_mm uint16, label index HxW).

    Label index is the position of the winning primitive in ``primitives``;
    -1 marks background.  Ties (shared faces) go to the earlier primitive.
    """
    us, vs = np.meshgrid(np.arange(width, dtype=np.float64), np.arange(height, dtype=np.float64))
    dx = (us - intrinsics.cx) / intrinsics.fx
    dy = (vs - intrinsics.cy) / intrinsics.fy
    best_t = np.full((height, width), background_z, dtype=np.float64)
    labels = np.full((height, width), -1, dtype=np.int64)
    for idx, prim in enumerate(primitives):
        t = prim.intersect(dx, dy)
        closer = t < best_t
        best_t = np.where(closer, t, best_t)
        labels = np.where(closer, idx, labels)
    depth_m = best_t
    if jitter_mm > 0:
        if rng is None:
            raise UsageError("jitter requires an rng")
        depth_m = depth_m + rng.uniform(-jitter_mm, jitter_mm, size=depth_m.shape) / 1000.0
    depth_mm = np.clip(np.round(depth_m * 1000.0), 0, 65535).astype(np.uint16)
    return depth_mm, labels


# ---------------------------------------------------------------------------
# parametric objects


def _object_primitives(kind: str, center: tuple[float, float, float]) -> list[Primitive]:
    """Primitives for one object, ordered by part label; center is (x, y, z) meters."""
    x0, y0, z0 = center
    if kind == "knife":
        return [
            Box((x0 - 0.13, y0 - 0.015, z0 - 0.02), (x0 - 0.01, y0 + 0.015, z0 + 0.02), "blade"),
            Box((x0 - 0.01, y0 - 0.018, z0 - 0.02), (x0 + 0.09, y0 + 0.018, z0 + 0.02), "handle"),
        ]
    if kind == "pan":
        return [
            Box((x0 - 0.10, y0 - 0.10, z0 - 0.03), (x0 + 0.10, y0 + 0.10, z0 + 0.03), "body"),
            Box((x0 + 0.10, y0 - 0.02, z0 - 0.03), (x0 + 0.24, y0 + 0.02, z0 + 0.03), "handle"),
        ]
    if kind == "bottle":
        return [
            CylinderY(x0, z0, y0 - 0.02, y0 + 0.14, 0.04, "body"),
            CylinderY(x0, z0, y0 - 0.065, y0 - 0.02, 0.022, "cap"),
        ]
    raise UsageError(f"unknown object kind {kind!r}")


@dataclass(frozen=True)
class SceneSpec:
    """Parametric description of one synthetic scene (object + task + clutter)."""

    name: str
    object_kind: str
    task: str
    width: int = 640
    height: int = 480
    center: tuple[float, float, float] = (0.0, 0.0, 0.75)
    occlusion_fraction: float = 0.0
    depth_jitter_mm: float = 0.0
    background_z: float = 1.6

    def __post_init__(self) -> None:
        if self.object_kind not in TASK_TABLES:
            raise UsageError(f"unknown object kind {self.object_kind!r}")
        if self.task not in TASK_TABLES[self.object_kind]:
            raise UsageError(f"no task table entry for {self.task!r}")
        if not (0.0 <= self.occlusion_fraction < 1.0):
            raise UsageError("occlusion_fraction must be in [0, 1)")
        if self.center[2] <= 0 or self.background_z <= self.center[2]:
            raise UsageError("object must sit in front of the camera and the background")


@dataclass(frozen=True)
class ExpectedOutcome:
    """Per-scene evaluation targets: task label set and the authored winner."""

    task: str
    expected_part_labels: tuple[str, ...]
    expected_winner_id: int | None = None
    min_part_coverage: float = 1.0

    def __post_init__(self) -> None:
        if not (0.0 < self.min_part_coverage <= 1.0):
            raise UsageError(f"min_part_coverage must be in (0, 1], got {self.min_part_coverage}")

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "expected_part_labels": list(self.expected_part_labels),
            "expected_winner_id": self.expected_winner_id,
            "min_part_coverage": self.min_part_coverage,
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExpectedOutcome":
        return cls(
            task=str(d["task"]),
            expected_part_labels=tuple(d["expected_part_labels"]),
            expected_winner_id=d.get("expected_winner_id"),
            min_part_coverage=float(d.get("min_part_coverage", 1.0)),
        )


@dataclass(frozen=True)
class SceneFixture:
    """A frame plus everything needed to run and judge the pipeline offline."""

    frame: RgbdFrame
    ground_truth_masks: dict[str, BinaryMask]
    confidences: dict[str, float]
    candidates: tuple[GraspCandidate, ...]
    decomposition_table: dict
    expected: ExpectedOutcome | None = None
    palette: dict[str, list[tuple[int, int, int]]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for label, mask in self.ground_truth_masks.items():
            if (mask.width, mask.height) != (self.frame.width, self.frame.height):
                raise UsageError(f"ground-truth mask {label!r} does not match frame dims")
        ids = [c.id for c in self.candidates]
        if len(set(ids)) != len(ids):
            raise UsageError(f"candidate ids not unique: {ids}")


# ---------------------------------------------------------------------------
# candidate authoring


def _erosion_anchor(mask: np.ndarray) -> tuple[int, int, int]:
    """(u, v, depth) of a most-interior pixel via iterated 4-neighbor erosion."""
    current = mask.astype(bool)
    level = 0
    while True:
        shrunk = current.copy()
        shrunk[1:, :] &= current[:-1, :]
        shrunk[:-1, :] &= current[1:, :]
        shrunk[:, 1:] &= current[:, :-1]
        shrunk[:, :-1] &= current[:, 1:]
        shrunk[0, :] = False
        shrunk[-1, :] = False
        shrunk[:, 0] = False
        shrunk[:, -1] = False
        if not shrunk.any():
            vs, us = np.nonzero(current)
            return int(us[0]), int(vs[0]), level
        current = shrunk
        level += 1


def _viewing_ray_candidate(
    cid: int, u: int, v: int, depth_m: float, intrinsics: CameraIntrinsics, confidence: float
) -> GraspCandidate:
    """Candidate whose contact sits at pixel (u, v) and whose approach axis is
    the viewing ray through it, so both reprojections land on that pixel."""
    x = (u - intrinsics.cx) * depth_m / intrinsics.fx
    y = (v - intrinsics.cy) * depth_m / intrinsics.fy
    contact = np.array([x, y, depth_m])
    direction = contact / np.linalg.norm(contact)
    up = np.array([0.0, 1.0, 0.0])
    bx = np.cross(up, direction)
    bx /= np.linalg.norm(bx)
    by = np.cross(direction, bx)
    rotation = np.column_stack([bx, by, direction])
    return GraspCandidate(
        id=cid,
        quaternion=matrix_to_quaternion(rotation),
        translation=contact - GRASP_STANDOFF_M * direction,
        contact_point=contact,
        generator_confidence=confidence,
    )


# ---------------------------------------------------------------------------
# scene generation


def _occluder_for_fraction(
    part_prims: list[Primitive],
    target_mask_free: np.ndarray,
    spec: SceneSpec,
    intrinsics: CameraIntrinsics,
    scene_prims: list[Primitive],
) -> Box:
    """Binary-search an occluding slab that hides ~spec.occlusion_fraction of the target."""
    lo = np.min([p.bounds()[0] for p in part_prims], axis=0)
    hi = np.max([p.bounds()[1] for p in part_prims], axis=0)
    z_obj = float(lo[2])
    z_occ_lo, z_occ_hi = 0.45, 0.55
    scale = z_occ_hi / z_obj  # shadow of the occluder grows toward the object
    y0 = float(lo[1]) * scale - 0.03
    y1 = float(hi[1]) * scale + 0.03
    x_left = float(lo[0]) * scale - 0.06
    edge_lo = float(lo[0]) * scale - 0.01
    edge_hi = float(hi[0]) * scale + 0.03
    target_total = int(target_mask_free.sum())
    if target_total == 0:
        raise SceneGenerationError("target part invisible before occlusion")
    part_index = {id(p): i for i, p in enumerate(scene_prims)}
    target_ids = [part_index[id(p)] for p in part_prims]

    def fraction(edge: float) -> float:
        occluder = Box((x_left, y0, z_occ_lo), (edge, y1, z_occ_hi), OCCLUDER_LABEL)
        _, labels = render(
            scene_prims + [occluder], spec.background_z, spec.width, spec.height, intrinsics
        )
        visible = np.isin(labels, target_ids) & target_mask_free
        return 1.0 - visible.sum() / target_total

    lo_e, hi_e = edge_lo, edge_hi
    for _ in range(40):
        mid = 0.5 * (lo_e + hi_e)
        if fraction(mid) < spec.occlusion_fraction:
            lo_e = mid
        else:
            hi_e = mid
    edge = hi_e
    achieved = fraction(edge)
    if abs(achieved - spec.occlusion_fraction) > 0.03:
        raise SceneGenerationError(
            f"could not reach occlusion {spec.occlusion_fraction:.2f} (got {achieved:.2f})"
        )
    return Box((x_left, y0, z_occ_lo), (edge, y1, z_occ_hi), OCCLUDER_LABEL)


def generate_scene(
    spec: SceneSpec, camera: CameraIntrinsics, seed: int = 0
) -> SceneFixture:
    """Render one deterministic scene with ground-truth masks and authored grasps."""
    object_kind = spec.object_kind
    prims = _object_primitives(object_kind, spec.center)
    part_labels = [p.label for p in prims]
    desirable, _undesirable = TASK_TABLES[object_kind][spec.task]

    occluders: list[Primitive] = []
    if spec.occlusion_fraction > 0:
        target_prims = [p for p in prims if p.label in desirable]
        _, labels_free = render(prims, spec.background_z, spec.width, spec.height, camera)
        target_ids = [i for i, p in enumerate(prims) if p.label in desirable]
        target_mask_free = np.isin(labels_free, target_ids)
        occluders.append(
            _occluder_for_fraction(target_prims, target_mask_free, spec, camera, prims)
        )

    all_prims = occluders + prims
    rng = np.random.default_rng(seed)
    depth_mm, labels = render(
        all_prims,
        spec.background_z,
        spec.width,
        spec.height,
        camera,
        jitter_mm=spec.depth_jitter_mm,
        rng=rng,
    )

    # visibility-aware ground-truth masks, parts partition the object
    masks: dict[str, BinaryMask] = {}
    offset = len(occluders)
    part_pixel_masks: dict[str, np.ndarray] = {}
    for i, prim in enumerate(prims):
        m = labels == offset + i
        part_pixel_masks[prim.label] = m
        if not m.any():
            raise SceneGenerationError(f"part {prim.label!r} is not visible in {spec.name!r}")
        masks[prim.label] = encode_mask(m.astype(np.uint8), spec.width, spec.height)
    object_pixels = np.isin(labels, [offset + i for i in range(len(prims))])
    masks[object_kind] = encode_mask(object_pixels.astype(np.uint8), spec.width, spec.height)

    # flat-shaded color + palette
    color = np.zeros((spec.height, spec.width, 3), dtype=np.uint8)
    color[:, :] = BACKGROUND_COLOR
    palette: dict[str, list[tuple[int, int, int]]] = {}
    for i, prim in enumerate(prims):
        rgb = PART_COLORS[i % len(PART_COLORS)]
        color[part_pixel_masks[prim.label]] = rgb
        palette[prim.label] = [rgb]
    palette[object_kind] = [PART_COLORS[i % len(PART_COLORS)] for i in range(len(prims))]
    for j, occ in enumerate(occluders):
        rgb = PART_COLORS[(len(prims) + j) % len(PART_COLORS)]
        color[labels == j] = rgb
        palette[occ.label] = [rgb]

    frame = RgbdFrame(
        width=spec.width, height=spec.height, color=color, depth_mm=depth_mm, intrinsics=camera
    )

    # one candidate per part, anchored at the most interior visible pixel
    candidates: list[GraspCandidate] = []
    winner_id: int | None = None
    for cid, label in enumerate(sorted(part_labels)):
        u, v, depth_of_anchor = _erosion_anchor(part_pixel_masks[label])
        if depth_of_anchor < MIN_ANCHOR_EROSION:
            raise SceneGenerationError(
                f"part {label!r} too thin for a safe anchor in {spec.name!r}"
            )
        z = float(depth_mm[v, u]) / 1000.0
        candidates.append(
            _viewing_ray_candidate(cid, u, v, z, camera, PART_CONFIDENCES.get(label, 0.9))
        )
        if label in desirable:
            winner_id = cid

    table = {
        task: {"object": object_kind, "grasp_parts": des, "avoid_parts": und}
        for task, (des, und) in TASK_TABLES[object_kind].items()
    }
    confidences = {object_kind: OBJECT_CONFIDENCE}
    confidences.update({label: PART_CONFIDENCES.get(label, 0.9) for label in part_labels})

    expected = ExpectedOutcome(
        task=spec.task,
        expected_part_labels=tuple(desirable),
        expected_winner_id=winner_id,
        min_part_coverage=1.0,
    )
    return SceneFixture(
        frame=frame,
        ground_truth_masks=masks,
        confidences=confidences,
        candidates=tuple(candidates),
        decomposition_table=table,
        expected=expected,
        palette=palette,
    )


# ---------------------------------------------------------------------------
# on-disk layout


def _dump_json(path: str, payload) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def save_scene(fixture: SceneFixture, scene_dir: str) -> None:
    """Write the fixture directory layout.

    intrinsics.json, color.png, depth.pgm (16-bit mm), masks/<label>.mask.json,
    masks/confidences.json, grasps.json, decomposition.json, expected.json,
    palette.json.
    """
    os.makedirs(scene_dir, exist_ok=True)
    masks_dir = os.path.join(scene_dir, "masks")
    os.makedirs(masks_dir, exist_ok=True)
    _dump_json(os.path.join(scene_dir, "intrinsics.json"), fixture.frame.intrinsics.to_json())
    with open(os.path.join(scene_dir, "color.png"), "wb") as f:
        f.write(encode_png_rgb(fixture.frame.color))
    write_pgm16(os.path.join(scene_dir, "depth.pgm"), fixture.frame.depth_mm)
    for label, mask in fixture.ground_truth_masks.items():
        if re.search(r"[/\\]", label):
            raise UsageError(f"label {label!r} cannot be used as a file name")
        _dump_json(os.path.join(masks_dir, f"{label}.mask.json"), mask.to_json())
    _dump_json(os.path.join(masks_dir, "confidences.json"), fixture.confidences)
    _dump_json(
        os.path.join(scene_dir, "grasps.json"), [c.to_json() for c in fixture.candidates]
    )
    _dump_json(os.path.join(scene_dir, "decomposition.json"), fixture.decomposition_table)
    if fixture.expected is not None:
        _dump_json(os.path.join(scene_dir, "expected.json"), fixture.expected.to_json())
    if fixture.palette:
        _dump_json(
            os.path.join(scene_dir, "palette.json"),
            {k: [list(c) for c in v] for k, v in fixture.palette.items()},
        )


def load_scene(scene_dir: str) -> SceneFixture:
    """Read a fixture directory written by :func:`save_scene`."""
    if not os.path.isdir(scene_dir):
        raise UsageError(f"scene directory not found: {scene_dir}")
    with open(os.path.join(scene_dir, "intrinsics.json")) as f:
        intrinsics = CameraIntrinsics.from_json(json.load(f))
    from .imaging import decode_png_rgb  # local import keeps module load light

    with open(os.path.join(scene_dir, "color.png"), "rb") as f:
        color = decode_png_rgb(f.read())
    depth_mm = read_pgm16(os.path.join(scene_dir, "depth.pgm"))
    height, width = depth_mm.shape
    frame = RgbdFrame(
        width=width, height=height, color=color, depth_mm=depth_mm, intrinsics=intrinsics
    )
    masks_dir = os.path.join(scene_dir, "masks")
    masks: dict[str, BinaryMask] = {}
    confidences: dict[str, float] = {}
    if os.path.isdir(masks_dir):
        for name in sorted(os.listdir(masks_dir)):
            if name.endswith(".mask.json"):
                with open(os.path.join(masks_dir, name)) as f:
                    masks[name[: -len(".mask.json")]] = BinaryMask.from_json(json.load(f))
        conf_path = os.path.join(masks_dir, "confidences.json")
        if os.path.exists(conf_path):
            with open(conf_path) as f:
                confidences = {k: float(v) for k, v in json.load(f).items()}
    grasps_path = os.path.join(scene_dir, "grasps.json")
    candidates: tuple[GraspCandidate, ...] = ()
    if os.path.exists(grasps_path):
        from .protocol import parse_candidates_payload

        with open(grasps_path) as f:
            candidates = tuple(parse_candidates_payload(json.load(f)))
    table: dict = {}
    table_path = os.path.join(scene_dir, "decomposition.json")
    if os.path.exists(table_path):
        with open(table_path) as f:
            table = json.load(f)
    expected = None
    expected_path = os.path.join(scene_dir, "expected.json")
    if os.path.exists(expected_path):
        with open(expected_path) as f:
            expected = ExpectedOutcome.from_json(json.load(f))
    palette: dict = {}
    palette_path = os.path.join(scene_dir, "palette.json")
    if os.path.exists(palette_path):
        with open(palette_path) as f:
            palette = {
                k: [tuple(c) for c in v] for k, v in json.load(f).items()
            }
    return SceneFixture(
        frame=frame,
        ground_truth_masks=masks,
        confidences=confidences,
        candidates=candidates,
        decomposition_table=table,
        expected=expected,
        palette=palette,
    )


# ---------------------------------------------------------------------------
# bundled suite

TABLETOP_SCENES = [
    ("knife", task) for task in TASK_TABLES["knife"]
] + [("pan", task) for task in TASK_TABLES["pan"]] + [
    ("bottle", task) for task in TASK_TABLES["bottle"]
]

CLUTTER_SCENES = [
    ("knife", "cut the vegetables", 0.2),
    ("pan", "hand over the pan", 0.3),
    ("bottle", "pour a glass of water", 0.4),
    ("knife", "hand over the knife", 0.5),
    ("pan", "fry an egg", 0.6),
]

DEFAULT_CAMERA = CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


def _slug(text: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")


def generate_bundled_suite(
    out_dir: str, seed: int = 0, camera: CameraIntrinsics = DEFAULT_CAMERA
) -> list[str]:
    """Write the bundled evaluation suite; returns the scene directories."""
    written: list[str] = []
    for kind, task in TABLETOP_SCENES:
        spec = SceneSpec(name=f"{kind}-{_slug(task)}", object_kind=kind, task=task)
        fixture = generate_scene(spec, camera, seed=seed)
        scene_dir = os.path.join(out_dir, "tabletop", spec.name)
        save_scene(fixture, scene_dir)
        written.append(scene_dir)
    for kind, task, fraction in CLUTTER_SCENES:
        spec = SceneSpec(
            name=f"{kind}-{_slug(task)}-occ{int(fraction * 100)}",
            object_kind=kind,
            task=task,
            occlusion_fraction=fraction,
        )
        fixture = generate_scene(spec, camera, seed=seed)
        scene_dir = os.path.join(out_dir, "clutter", spec.name)
        save_scene(fixture, scene_dir)
        written.append(scene_dir)
    return written


# ---------------------------------------------------------------------------
# evaluation


@dataclass(frozen=True)
class PartSelectionVerdict:
    success: bool
    label_match: bool
    coverage: dict[str, float]
    reasons: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "success": self.success,
            "label_match": self.label_match,
            "coverage": self.coverage,
            "reasons": list(self.reasons),
        }


def mask_coverage(returned: BinaryMask, truth: BinaryMask) -> float:
    """|returned AND truth| / |truth|; 0 when the truth mask is empty."""
    t = truth.to_array().astype(bool)
    total = int(t.sum())
    if total == 0:
        return 0.0
    r = returned.to_array().astype(bool)
    return float((r & t).sum() / total)


def evaluate_part_selection(result, fixture: SceneFixture) -> PartSelectionVerdict:
    """Judge one pipeline run against the fixture's expected outcome.

    Success requires (a) the decomposition's desirable labels to equal the
    expected label set and (b) each returned part mask to cover at least
    ``min_part_coverage`` of its ground-truth mask.
    """
    if fixture.expected is None:
        raise UsageError("fixture has no expected outcome")
    expected = fixture.expected
    reasons: list[str] = []
    decomposition = getattr(result, "decomposition", None)
    if decomposition is None:
        return PartSelectionVerdict(
            success=False,
            label_match=False,
            coverage={},
            reasons=("pipeline produced no decomposition",),
        )
    got_labels = set(decomposition.desirable_parts)
    want_labels = set(expected.expected_part_labels)
    label_match = got_labels == want_labels
    if not label_match:
        reasons.append(f"desirable labels {sorted(got_labels)} != expected {sorted(want_labels)}")

    segments: dict[str, PartSegment] = {}
    segmentation: SegmentationResult | None = getattr(result, "segmentation", None)
    if segmentation is not None:
        segments = {s.label: s for s in segmentation.part_segments}
    coverage: dict[str, float] = {}
    for label in sorted(want_labels):
        truth = fixture.ground_truth_masks.get(label)
        if truth is None:
            coverage[label] = 0.0
            reasons.append(f"no ground-truth mask for {label!r}")
            continue
        seg = segments.get(label)
        if seg is None:
            coverage[label] = 0.0
            reasons.append(f"pipeline returned no mask for {label!r}")
            continue
        coverage[label] = mask_coverage(seg.mask, truth)
        if coverage[label] < expected.min_part_coverage:
            reasons.append(
                f"coverage {coverage[label]:.3f} for {label!r} below "
                f"{expected.min_part_coverage}"
            )
    success = label_match and all(
        coverage.get(label, 0.0) >= expected.min_part_coverage for label in want_labels
    )
    return PartSelectionVerdict(
        success=success, label_match=label_match, coverage=coverage, reasons=tuple(reasons)
    )
