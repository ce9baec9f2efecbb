"""Task-conditioned affordance heatmap: signed composition, scaling, blur, lookup.

The raw heatmap starts at zero, gains a positive base weight on every
whole-object pixel, adds each desirable part mask scaled by its confidence,
and subtracts each undesirable part mask scaled by its confidence.
Finalization min-max scales to [0, 255] and smooths with a 3x3 kernel.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, UsageError
from .imaging import encode_png_gray8
from .model import AffordanceHeatmap, PartSegment


@dataclass(frozen=True)
class HeatmapParams:
    """Knobs for heatmap composition and finalization.

    ``blur_sigma=None`` selects the exact binomial 3x3 kernel
    [1,2,1] (x) [1,2,1] / 16; an explicit sigma samples a Gaussian at
    offsets {-1, 0, 1} and normalizes.
    """

    object_base_weight: float = 0.5
    blur_sigma: float | None = None
    border_mode: str = "replicate"

    def __post_init__(self) -> None:
        if not self.object_base_weight > 0:
            raise UsageError(f"object base weight must be > 0, got {self.object_base_weight}")
        if self.blur_sigma is not None and not self.blur_sigma > 0:
            raise UsageError(f"blur sigma must be > 0, got {self.blur_sigma}")
        if self.border_mode != "replicate":
            raise UsageError(f"unsupported border mode {self.border_mode!r}")

    def to_json(self) -> dict:
        return {
            "object_base_weight": self.object_base_weight,
            "blur_sigma": self.blur_sigma,
            "border_mode": self.border_mode,
        }

    @classmethod
    def from_json(cls, d: dict) -> "HeatmapParams":
        return cls(
            object_base_weight=float(d.get("object_base_weight", 0.5)),
            blur_sigma=None if d.get("blur_sigma") is None else float(d["blur_sigma"]),
            border_mode=str(d.get("border_mode", "replicate")),
        )


def blur_kernel(sigma: float | None) -> np.ndarray:
    """3x3 smoothing kernel; separable, positive, sums to 1."""
    if sigma is None:
        axis = np.array([0.25, 0.5, 0.25], dtype=np.float64)
    else:
        w = math.exp(-1.0 / (2.0 * sigma * sigma))
        axis = np.array([w, 1.0, w], dtype=np.float64)
        axis = axis / axis.sum()
    return np.outer(axis, axis)


def _segment_sort_key(segment: PartSegment):
    return (segment.label, segment.confidence, segment.mask.runs)


def compose(
    frame_dims: tuple[int, int],
    object_segment: PartSegment,
    desirable: list[PartSegment],
    undesirable: list[PartSegment],
    params: HeatmapParams,
) -> np.ndarray:
    """Build the raw (unscaled) heatmap.

    raw = base * object_mask + sum(conf_d * mask_d) - sum(conf_u * mask_u).
    Segments are accumulated in a canonical order so any permutation of the
    input lists yields a bitwise-identical raster.
    """
    width, height = frame_dims
    raw = np.zeros((height, width), dtype=np.float64)

    def check_dims(segment: PartSegment) -> None:
        if (segment.mask.width, segment.mask.height) != (width, height):
            raise DimensionError(
                f"segment {segment.label!r} mask {segment.mask.width}x{segment.mask.height} "
                f"does not match frame {width}x{height}"
            )

    check_dims(object_segment)
    raw += params.object_base_weight * object_segment.mask.to_matrix().astype(np.float64)
    for segment in sorted(desirable, key=_segment_sort_key):
        check_dims(segment)
        raw += segment.confidence * segment.mask.to_matrix().astype(np.float64)
    for segment in sorted(undesirable, key=_segment_sort_key):
        check_dims(segment)
        raw -= segment.confidence * segment.mask.to_matrix().astype(np.float64)
    return raw


def finalize(raw: np.ndarray, params: HeatmapParams) -> AffordanceHeatmap:
    """Min-max scale the raw heatmap to [0, 255], then blur.

    A constant raw heatmap scales to all zeros.  The final clip guards the
    [0, 255] containment guarantee against last-ulp rounding in the blur.
    """
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2 or raw.size == 0:
        raise DimensionError(f"raw heatmap must be a non-empty 2D array, got shape {raw.shape}")
    lo = float(raw.min())
    hi = float(raw.max())
    if hi > lo:
        # ratio first: fl((v-lo)/(hi-lo)) <= 1, so the max lands on 255 exactly
        scaled = (raw - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(raw)
    blurred = _convolve3_replicate(scaled, blur_kernel(params.blur_sigma))
    np.clip(blurred, 0.0, 255.0, out=blurred)
    height, width = blurred.shape
    return AffordanceHeatmap(width=width, height=height, values=blurred)


def _convolve3_replicate(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    padded = np.pad(img, 1, mode="edge")
    h, w = img.shape
    out = np.zeros_like(img)
    for di in range(3):
        for dj in range(3):
            out += kernel[di, dj] * padded[di : di + h, dj : dj + w]
    return out


def pixel_index(u: float, v: float) -> tuple[int, int]:
    """Round a continuous pixel coordinate to its nearest integer pixel (half rounds up)."""
    return (int(math.floor(u + 0.5)), int(math.floor(v + 0.5)))


def sample(heatmap: AffordanceHeatmap, pixel: tuple[float, float]) -> float:
    """Heatmap value at the nearest integer pixel; out-of-bounds samples are 0."""
    iu, iv = pixel_index(pixel[0], pixel[1])
    if 0 <= iu < heatmap.width and 0 <= iv < heatmap.height:
        return float(heatmap.values[iv, iu])
    return 0.0


def to_png_bytes(heatmap: AffordanceHeatmap) -> bytes:
    """8-bit grayscale PNG; values are rounded, not rescaled."""
    arr = np.floor(heatmap.values + 0.5)
    arr = np.clip(arr, 0, 255).astype(np.uint8)
    return encode_png_gray8(arr)


def export(heatmap: AffordanceHeatmap, params: HeatmapParams, png_path: str) -> str:
    """Write the heatmap PNG plus a JSON sidecar with the generating params."""
    with open(png_path, "wb") as f:
        f.write(to_png_bytes(heatmap))
    sidecar = os.path.splitext(png_path)[0] + ".json"
    with open(sidecar, "w") as f:
        json.dump(
            {"width": heatmap.width, "height": heatmap.height, "params": params.to_json()},
            f,
            indent=2,
            sort_keys=True,
        )
        f.write("\n")
    return sidecar
