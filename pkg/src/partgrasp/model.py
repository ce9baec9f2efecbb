"""Shared domain types: frames, masks, decompositions, heatmaps, grasps.

All types are immutable after construction (numpy buffers are marked
read-only) and safe to share between threads.  Each type has a JSON serial
form; ``to_json`` / ``from_json`` round-trip exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionError,
    InvalidDecompositionError,
    MalformedCandidateError,
    MalformedMaskError,
    UsageError,
)
from .imaging import (
    decode_png_gray16,
    decode_png_rgb,
    encode_png_gray16,
    encode_png_rgb,
    from_b64,
    to_b64,
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


# ---------------------------------------------------------------------------
# camera + frame


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics in pixels. Optical frame: +x right, +y down, +z forward."""

    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self) -> None:
        if not (self.fx > 0 and self.fy > 0):
            raise UsageError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if not (math.isfinite(self.cx) and math.isfinite(self.cy)):
            raise UsageError("principal point must be finite")

    def to_json(self) -> dict:
        return {"fx": self.fx, "fy": self.fy, "cx": self.cx, "cy": self.cy}

    @classmethod
    def from_json(cls, d: dict) -> "CameraIntrinsics":
        return cls(fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]))


@dataclass(frozen=True)
class RgbdFrame:
    """Registered color + depth raster.

    ``color`` is uint8 (height, width, 3); ``depth_mm`` is uint16 (height,
    width) in millimeters with 0 marking a missing measurement.  Depth stays
    integral in storage; geometry converts to meters when building 3D points.
    """

    width: int
    height: int
    color: np.ndarray
    depth_mm: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"frame dims must be >= 1, got {self.width}x{self.height}")
        if self.color.shape != (self.height, self.width, 3):
            raise DimensionError(
                f"color shape {self.color.shape} != ({self.height}, {self.width}, 3)"
            )
        if self.depth_mm.shape != (self.height, self.width):
            raise DimensionError(
                f"depth shape {self.depth_mm.shape} != ({self.height}, {self.width})"
            )
        object.__setattr__(self, "color", _freeze(self.color.astype(np.uint8, copy=False)))
        object.__setattr__(self, "depth_mm", _freeze(self.depth_mm.astype(np.uint16, copy=False)))

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "color_png_b64": to_b64(encode_png_rgb(self.color)),
            "depth_png16_b64": to_b64(encode_png_gray16(self.depth_mm)),
            "intrinsics": self.intrinsics.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> "RgbdFrame":
        return cls(
            width=int(d["width"]),
            height=int(d["height"]),
            color=decode_png_rgb(from_b64(d["color_png_b64"])),
            depth_mm=decode_png_gray16(from_b64(d["depth_png16_b64"])),
            intrinsics=CameraIntrinsics.from_json(d["intrinsics"]),
        )


# ---------------------------------------------------------------------------
# task + decomposition


@dataclass(frozen=True)
class TaskRequest:
    task: str
    object_hint: str | None = None

    def __post_init__(self) -> None:
        if not self.task.strip():
            raise UsageError("task must be non-empty")

    def to_json(self) -> dict:
        return {"task": self.task, "object_hint": self.object_hint}

    @classmethod
    def from_json(cls, d: dict) -> "TaskRequest":
        return cls(task=str(d["task"]), object_hint=d.get("object_hint"))


def normalize_labels(labels: list[str]) -> list[str]:
    """Lowercase, trim, drop empties, dedup preserving first occurrence."""
    seen: set[str] = set()
    out: list[str] = []
    for raw in labels:
        label = str(raw).strip().lower()
        if label and label not in seen:
            seen.add(label)
            out.append(label)
    return out


@dataclass(frozen=True)
class PartDecomposition:
    """Object name plus the parts to grasp and the parts to avoid."""

    object_name: str
    desirable_parts: tuple[str, ...]
    undesirable_parts: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.object_name.strip():
            raise InvalidDecompositionError("object name must be non-empty")
        if not self.desirable_parts:
            raise InvalidDecompositionError("no graspable part was named")
        des = {p.strip().lower() for p in self.desirable_parts}
        und = {p.strip().lower() for p in self.undesirable_parts}
        overlap = des & und
        if overlap:
            raise InvalidDecompositionError(
                f"parts listed as both desirable and undesirable: {sorted(overlap)}"
            )

    def to_json(self) -> dict:
        return {
            "object": self.object_name,
            "grasp_parts": list(self.desirable_parts),
            "avoid_parts": list(self.undesirable_parts),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PartDecomposition":
        return cls(
            object_name=str(d["object"]),
            desirable_parts=tuple(d["grasp_parts"]),
            undesirable_parts=tuple(d["avoid_parts"]),
        )


# ---------------------------------------------------------------------------
# masks


@dataclass(frozen=True)
class BinaryMask:
    """Row-major RLE binary mask; runs alternate zero/one starting with a zero-run."""

    width: int
    height: int
    runs: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.width < 1 or self.height < 1:
            raise DimensionError(f"mask dims must be >= 1, got {self.width}x{self.height}")
        runs = tuple(int(r) for r in self.runs)
        if any(r < 0 for r in runs):
            raise MalformedMaskError(f"negative run length in {runs[:8]}...")
        if sum(runs) != self.width * self.height:
            raise MalformedMaskError(
                f"run lengths sum to {sum(runs)}, expected {self.width * self.height}"
            )
        object.__setattr__(self, "runs", runs)

    def to_array(self) -> np.ndarray:
        """Decode to a flat row-major uint8 array of {0,1}."""
        out = np.empty(self.width * self.height, dtype=np.uint8)
        pos = 0
        val = 0
        for run in self.runs:
            out[pos : pos + run] = val
            pos += run
            val = 1 - val
        return out

    def to_matrix(self) -> np.ndarray:
        return self.to_array().reshape(self.height, self.width)

    def pixel_count(self) -> int:
        return int(sum(self.runs[1::2]))

    def to_json(self) -> dict:
        return {"width": self.width, "height": self.height, "mask_rle": list(self.runs)}

    @classmethod
    def from_json(cls, d: dict) -> "BinaryMask":
        return cls(width=int(d["width"]), height=int(d["height"]), runs=tuple(d["mask_rle"]))


def encode_mask(bitmap, width: int, height: int) -> BinaryMask:
    """Run-length encode a row-major {0,1} bitmap.

    The first run counts leading zeros and may be 0; subsequent runs
    alternate one/zero and are always positive.
    """
    flat = np.asarray(bitmap).reshape(-1)
    if flat.size != width * height:
        raise DimensionError(f"bitmap has {flat.size} entries, expected {width * height}")
    bits = (flat != 0).astype(np.int64)
    runs: list[int] = []
    # boundaries of equal-value runs
    change = np.flatnonzero(np.diff(bits)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [bits.size]))
    if bits[0] == 1:
        runs.append(0)
    for s, e in zip(starts, ends):
        runs.append(int(e - s))
    return BinaryMask(width=width, height=height, runs=tuple(runs))


def decode_mask(mask: BinaryMask) -> np.ndarray:
    """Inverse of :func:`encode_mask`; returns a flat row-major uint8 array."""
    return mask.to_array()


@dataclass(frozen=True)
class PartSegment:
    """A labeled binary mask with detection confidence in [0, 1]."""

    label: str
    mask: BinaryMask
    confidence: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.confidence <= 1.0):
            raise UsageError(f"confidence {self.confidence} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "confidence": self.confidence,
            "mask_rle": list(self.mask.runs),
            "width": self.mask.width,
            "height": self.mask.height,
        }

    @classmethod
    def from_json(cls, d: dict) -> "PartSegment":
        mask = BinaryMask(width=int(d["width"]), height=int(d["height"]), runs=tuple(d["mask_rle"]))
        return cls(label=str(d["label"]), mask=mask, confidence=float(d["confidence"]))


# ---------------------------------------------------------------------------
# heatmap


@dataclass(frozen=True)
class AffordanceHeatmap:
    """Per-pixel score raster; finalization guarantees values in [0, 255]."""

    width: int
    height: int
    values: np.ndarray

    def __post_init__(self) -> None:
        if self.values.shape != (self.height, self.width):
            raise DimensionError(
                f"heatmap shape {self.values.shape} != ({self.height}, {self.width})"
            )
        if not np.isfinite(self.values).all():
            raise UsageError("heatmap values must be finite")
        object.__setattr__(self, "values", _freeze(self.values.astype(np.float64, copy=False)))

    def to_json(self) -> dict:
        return {
            "width": self.width,
            "height": self.height,
            "values": [float(v) for v in self.values.reshape(-1)],
        }

    @classmethod
    def from_json(cls, d: dict) -> "AffordanceHeatmap":
        w, h = int(d["width"]), int(d["height"])
        values = np.asarray(d["values"], dtype=np.float64).reshape(h, w)
        return cls(width=w, height=h, values=values)


# ---------------------------------------------------------------------------
# grasps


def quaternion_to_matrix(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a wxyz quaternion (normalized internally)."""
    w, x, y, z = (float(v) for v in np.asarray(q, dtype=np.float64) / np.linalg.norm(q))
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ],
        dtype=np.float64,
    )


def matrix_to_quaternion(R: np.ndarray) -> np.ndarray:
    """wxyz unit quaternion from a rotation matrix (Shepperd's method)."""
    R = np.asarray(R, dtype=np.float64)
    t = np.trace(R)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    q = q / np.linalg.norm(q)
    if q[0] < 0:
        q = -q
    return q


ROTATION_TOLERANCE = 1e-6


@dataclass(frozen=True)
class GraspCandidate:
    """A 6-DOF grasp proposal in the camera frame.

    ``quaternion`` is wxyz and must be unit within 1e-6; ``translation`` and
    ``contact_point`` are meters.  The approach axis is the rotation's third
    column (gripper z points toward the object).
    """

    id: int
    quaternion: np.ndarray
    translation: np.ndarray
    contact_point: np.ndarray
    generator_confidence: float

    def __post_init__(self) -> None:
        q = np.asarray(self.quaternion, dtype=np.float64).reshape(-1)
        t = np.asarray(self.translation, dtype=np.float64).reshape(-1)
        c = np.asarray(self.contact_point, dtype=np.float64).reshape(-1)
        if q.shape != (4,) or t.shape != (3,) or c.shape != (3,):
            raise MalformedCandidateError(
                f"candidate {self.id}: bad pose/contact shapes {q.shape} {t.shape} {c.shape}"
            )
        if abs(float(np.linalg.norm(q)) - 1.0) > ROTATION_TOLERANCE:
            raise MalformedCandidateError(
                f"candidate {self.id}: quaternion norm {np.linalg.norm(q):.9f} not unit"
            )
        if not (np.isfinite(t).all() and np.isfinite(c).all()):
            raise MalformedCandidateError(f"candidate {self.id}: non-finite pose or contact")
        if not (0.0 <= self.generator_confidence <= 1.0):
            raise MalformedCandidateError(
                f"candidate {self.id}: confidence {self.generator_confidence} outside [0, 1]"
            )
        object.__setattr__(self, "quaternion", _freeze(q))
        object.__setattr__(self, "translation", _freeze(t))
        object.__setattr__(self, "contact_point", _freeze(c))

    def rotation_matrix(self) -> np.ndarray:
        return quaternion_to_matrix(self.quaternion)

    def approach_axis(self) -> np.ndarray:
        """Third column of the rotation: the gripper approach direction."""
        return self.rotation_matrix()[:, 2]

    @classmethod
    def from_matrix(
        cls,
        id: int,
        rotation: np.ndarray,
        translation,
        contact_point,
        generator_confidence: float,
    ) -> "GraspCandidate":
        R = np.asarray(rotation, dtype=np.float64)
        if R.shape != (3, 3) or np.abs(R @ R.T - np.eye(3)).max() > ROTATION_TOLERANCE:
            raise MalformedCandidateError(f"candidate {id}: rotation not orthonormal within 1e-6")
        return cls(
            id=id,
            quaternion=matrix_to_quaternion(R),
            translation=np.asarray(translation, dtype=np.float64),
            contact_point=np.asarray(contact_point, dtype=np.float64),
            generator_confidence=generator_confidence,
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "pose": {
                "quaternion": [float(v) for v in self.quaternion],
                "translation": [float(v) for v in self.translation],
            },
            "contact_point": [float(v) for v in self.contact_point],
            "confidence": self.generator_confidence,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GraspCandidate":
        try:
            return cls(
                id=int(d["id"]),
                quaternion=np.asarray(d["pose"]["quaternion"], dtype=np.float64),
                translation=np.asarray(d["pose"]["translation"], dtype=np.float64),
                contact_point=np.asarray(d["contact_point"], dtype=np.float64),
                generator_confidence=float(d["confidence"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedCandidateError(f"bad candidate record: {exc}") from exc


@dataclass(frozen=True)
class RankedGrasp:
    """A candidate with its contact, approach-axis, and total scores."""

    candidate: GraspCandidate
    contact_score: float
    zaxis_score: float
    total_score: float
    contact_pixel: tuple[int, int] | None = None
    zaxis_pixel: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        if self.total_score != self.contact_score + self.zaxis_score:
            raise UsageError(
                f"total score {self.total_score} != {self.contact_score} + {self.zaxis_score}"
            )

    def to_json(self) -> dict:
        return {
            "candidate": self.candidate.to_json(),
            "contact_score": self.contact_score,
            "zaxis_score": self.zaxis_score,
            "total_score": self.total_score,
            "contact_pixel": list(self.contact_pixel) if self.contact_pixel else None,
            "zaxis_pixel": list(self.zaxis_pixel) if self.zaxis_pixel else None,
        }

    @classmethod
    def from_json(cls, d: dict) -> "RankedGrasp":
        return cls(
            candidate=GraspCandidate.from_json(d["candidate"]),
            contact_score=float(d["contact_score"]),
            zaxis_score=float(d["zaxis_score"]),
            total_score=float(d["total_score"]),
            contact_pixel=tuple(d["contact_pixel"]) if d.get("contact_pixel") else None,
            zaxis_pixel=tuple(d["zaxis_pixel"]) if d.get("zaxis_pixel") else None,
        )


# ---------------------------------------------------------------------------
# point cloud


@dataclass(frozen=True)
class ObjectPointCloud:
    """Camera-frame points (meters) with the pixel each point came from."""

    points: np.ndarray = field(repr=False)
    source_pixels: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        pix = np.asarray(self.source_pixels, dtype=np.int64).reshape(-1, 2)
        if pts.shape[0] != pix.shape[0]:
            raise DimensionError(
                f"{pts.shape[0]} points but {pix.shape[0]} source pixels"
            )
        if pts.shape[0] and not (pts[:, 2] > 0).all():
            raise UsageError("all cloud points must have z > 0")
        object.__setattr__(self, "points", _freeze(pts))
        object.__setattr__(self, "source_pixels", _freeze(pix))

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def to_json(self) -> dict:
        return {
            "points": [[float(v) for v in p] for p in self.points],
            "source_pixels": [[int(v) for v in p] for p in self.source_pixels],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ObjectPointCloud":
        return cls(
            points=np.asarray(d["points"], dtype=np.float64).reshape(-1, 3),
            source_pixels=np.asarray(d["source_pixels"], dtype=np.int64).reshape(-1, 2),
        )
