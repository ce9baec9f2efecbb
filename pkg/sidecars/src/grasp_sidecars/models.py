"""Model adapters behind the two sidecars.

A segmentation adapter maps (rgb image, queries) to labeled masks with
confidences; a grasp adapter maps (depth, intrinsics, object mask) to 6-DOF
candidates.  Real networks implement the same callables and are selected by
configuration; the built-ins below run anywhere and serve the synthetic
scene corpus:

  color-lut      flat-shade lookup segmentation driven by a palette file,
                 one detection per connected component
  masked-depth   heuristic proposer: evenly spaced seeds over the masked
                 cloud, approach along the viewing ray
"""

from __future__ import annotations

import importlib
import json
import math
from collections import deque

import numpy as np


# ---------------------------------------------------------------------------
# segmentation: color-lookup


def connected_components(mask: np.ndarray) -> list[np.ndarray]:
    """4-connected components of a boolean mask, in first-pixel row-major order."""
    h, w = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    components: list[np.ndarray] = []
    for v0, u0 in zip(*np.nonzero(mask)):
        if seen[v0, u0]:
            continue
        comp = np.zeros_like(mask, dtype=bool)
        queue = deque([(int(v0), int(u0))])
        seen[v0, u0] = True
        while queue:
            v, u = queue.popleft()
            comp[v, u] = True
            for dv, du in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                nv, nu = v + dv, u + du
                if 0 <= nv < h and 0 <= nu < w and mask[nv, nu] and not seen[nv, nu]:
                    seen[nv, nu] = True
                    queue.append((nv, nu))
        components.append(comp)
    return components


class ColorLutSegmenter:
    """Segment flat-shaded renders by palette lookup.

    The palette maps each label to the RGB colors it may appear as (a whole
    object lists all of its parts' colors).  Every connected component of the
    matched pixels becomes one detection; its confidence is its share of the
    label's matched pixels, so the dominant instance wins deduplication.
    """

    def __init__(self, palette: dict[str, list[tuple[int, int, int]]], tolerance: int = 2):
        self.palette = {
            label: [tuple(int(c) for c in color) for color in colors]
            for label, colors in palette.items()
        }
        self.tolerance = int(tolerance)

    @classmethod
    def from_options(cls, options: dict) -> "ColorLutSegmenter":
        path = options.get("palette")
        if not path:
            raise ValueError("color-lut model needs options.palette (JSON file path)")
        with open(path) as f:
            palette = json.load(f)
        return cls(palette, tolerance=int(options.get("tolerance", 2)))

    def segment(self, image: np.ndarray, queries: list[str]):
        results = []
        img = image.astype(np.int64)
        for label in queries:
            colors = self.palette.get(label)
            if not colors:
                continue
            match = np.zeros(image.shape[:2], dtype=bool)
            for color in colors:
                diff = np.abs(img - np.asarray(color, dtype=np.int64)).max(axis=2)
                match |= diff <= self.tolerance
            total = int(match.sum())
            if total == 0:
                continue
            for comp in connected_components(match):
                confidence = float(comp.sum() / total)
                results.append((label, comp, confidence))
        return results


# ---------------------------------------------------------------------------
# grasps: masked-depth heuristic


def _basis_quaternion(direction: np.ndarray) -> np.ndarray:
    """wxyz quaternion whose rotation has ``direction`` as its z column."""
    z = direction / np.linalg.norm(direction)
    up = np.array([0.0, 1.0, 0.0])
    if abs(float(up @ z)) > 0.99:
        up = np.array([1.0, 0.0, 0.0])
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.column_stack([x, y, z])
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
    return q / np.linalg.norm(q)


class MaskedDepthGraspProposer:
    """Propose grasps on the masked depth: evenly spaced surface seeds,
    approach along the viewing ray, fixed standoff.  Deterministic."""

    def __init__(self, max_candidates: int = 12, standoff_m: float = 0.15):
        if max_candidates < 1:
            raise ValueError("max_candidates must be >= 1")
        self.max_candidates = int(max_candidates)
        self.standoff_m = float(standoff_m)

    @classmethod
    def from_options(cls, options: dict) -> "MaskedDepthGraspProposer":
        return cls(
            max_candidates=int(options.get("max_candidates", 12)),
            standoff_m=float(options.get("standoff_m", 0.15)),
        )

    def propose(self, depth_m: np.ndarray, intrinsics: dict, mask: np.ndarray) -> list[dict]:
        fx, fy = float(intrinsics["fx"]), float(intrinsics["fy"])
        cx, cy = float(intrinsics["cx"]), float(intrinsics["cy"])
        valid = mask & (depth_m > 0)
        vs, us = np.nonzero(valid)
        if us.size == 0:
            return []
        k = min(self.max_candidates, us.size)
        picks = np.unique(np.linspace(0, us.size - 1, k).astype(np.int64))
        candidates: list[dict] = []
        for rank, idx in enumerate(picks):
            u, v = int(us[idx]), int(vs[idx])
            z = float(depth_m[v, u])
            point = np.array([(u - cx) * z / fx, (v - cy) * z / fy, z])
            direction = point / np.linalg.norm(point)
            translation = point - self.standoff_m * direction
            confidence = round(0.95 - 0.45 * (rank / max(len(picks) - 1, 1)), 4)
            candidates.append(
                {
                    "id": rank,
                    "pose": {
                        "quaternion": [float(q) for q in _basis_quaternion(direction)],
                        "translation": [float(t) for t in translation],
                    },
                    "contact_point": [float(p) for p in point],
                    "confidence": confidence,
                }
            )
        return candidates


# ---------------------------------------------------------------------------
# registry

SEGMENTATION_MODELS = {"color-lut": ColorLutSegmenter.from_options}
GRASP_MODELS = {"masked-depth": MaskedDepthGraspProposer.from_options}


def load_model(identifier: str, registry: dict, options: dict):
    """Resolve a registry name or a dotted "module:factory" path."""
    if identifier in registry:
        return registry[identifier](options)
    if ":" in identifier:
        module_name, attr = identifier.split(":", 1)
        module = importlib.import_module(module_name)
        factory = getattr(module, attr)
        return factory(options)
    raise ValueError(
        f"unknown model {identifier!r}; registry has {sorted(registry)} "
        "and dotted module:factory paths are accepted"
    )
