"""Pinhole projection, masked-depth point clouds, nearest point to a 3D line.

Everything operates in the camera optical frame (+x right, +y down,
+z forward); 3D quantities are meters.  All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import BehindCameraError, DimensionError, EmptyCloudError, InvalidDepthError, UsageError
from .model import BinaryMask, CameraIntrinsics, ObjectPointCloud, RgbdFrame

DIRECTION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Line3:
    """Infinite 3D line through ``origin`` with unit ``direction``."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self) -> None:
        o = np.array(self.origin, dtype=np.float64).reshape(3)
        d = np.array(self.direction, dtype=np.float64).reshape(3)
        norm = float(np.sqrt(np.sum(d * d)))
        if norm < DIRECTION_TOLERANCE:
            raise UsageError("line direction must be non-zero")
        d = d / norm
        o.flags.writeable = False
        d.flags.writeable = False
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d)


def project(point, intrinsics: CameraIntrinsics) -> tuple[float, float]:
    """Pinhole projection: u = fx*x/z + cx, v = fy*y/z + cy. Requires z > 0."""
    x, y, z = (float(v) for v in np.asarray(point, dtype=np.float64).reshape(3))
    if z <= 0:
        raise BehindCameraError(f"cannot project point with z={z}")
    u = intrinsics.fx * x / z + intrinsics.cx
    v = intrinsics.fy * y / z + intrinsics.cy
    return (u, v)


def deproject(pixel, depth_m: float, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Inverse pinhole map: pixel + depth (meters) to a camera-frame point."""
    if depth_m <= 0:
        raise InvalidDepthError(f"depth must be positive, got {depth_m}")
    u, v = (float(c) for c in pixel)
    x = (u - intrinsics.cx) * depth_m / intrinsics.fx
    y = (v - intrinsics.cy) * depth_m / intrinsics.fy
    return np.array([x, y, depth_m], dtype=np.float64)


def extract_object_cloud(frame: RgbdFrame, object_mask: BinaryMask) -> ObjectPointCloud:
    """Deproject every masked pixel with a valid depth measurement.

    Points come out in row-major pixel order; ``source_pixels`` records the
    (u, v) each point was lifted from.  Depth 0 pixels are skipped.
    """
    if (object_mask.width, object_mask.height) != (frame.width, frame.height):
        raise DimensionError(
            f"mask {object_mask.width}x{object_mask.height} does not match "
            f"frame {frame.width}x{frame.height}"
        )
    selected = (object_mask.to_matrix() != 0) & (frame.depth_mm > 0)
    vs, us = np.nonzero(selected)
    if us.size == 0:
        raise EmptyCloudError("object mask contains no pixels with valid depth")
    z = frame.depth_mm[vs, us].astype(np.float64) / 1000.0
    intr = frame.intrinsics
    x = (us.astype(np.float64) - intr.cx) * z / intr.fx
    y = (vs.astype(np.float64) - intr.cy) * z / intr.fy
    points = np.stack([x, y, z], axis=1)
    pixels = np.stack([us, vs], axis=1).astype(np.int64)
    return ObjectPointCloud(points=points, source_pixels=pixels)


class NearestPoint(NamedTuple):
    point: np.ndarray
    pixel: tuple[int, int]
    index: int


def nearest_point_to_line(
    cloud: ObjectPointCloud, line: Line3, mode: str = "line"
) -> NearestPoint:
    """Exhaustive scan for the cloud point closest to the line.

    ``mode="line"`` measures perpendicular distance |(q - origin) x direction|
    to the infinite line; ``mode="ray"`` measures distance to the half-line
    starting at the origin (points behind the origin measure to the origin
    itself).  Ties break to the lowest point index.
    """
    if mode not in ("line", "ray"):
        raise UsageError(f"unknown mode {mode!r}")
    if len(cloud) == 0:
        raise EmptyCloudError("cannot search an empty cloud")
    rel = cloud.points - line.origin
    cross = np.cross(rel, line.direction)
    dist_sq = np.sum(cross * cross, axis=1)
    if mode == "ray":
        t = rel @ line.direction
        behind = t < 0
        if behind.any():
            dist_sq = np.where(behind, np.sum(rel * rel, axis=1), dist_sq)
    index = int(np.argmin(dist_sq))
    u, v = (int(c) for c in cloud.source_pixels[index])
    return NearestPoint(point=cloud.points[index].copy(), pixel=(u, v), index=index)
