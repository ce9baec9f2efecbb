"""Wire-format helpers: run-length masks and PNG payload codecs.

The mask RLE is row-major with alternating zero/one run lengths, starting
with a zero-run; run lengths must sum to width*height.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image


def encode_rle(mask: np.ndarray) -> list[int]:
    """Row-major RLE of a binary mask, first run counting leading zeros."""
    flat = (np.asarray(mask).reshape(-1) != 0).astype(np.int64)
    runs: list[int] = []
    change = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [flat.size]))
    if flat[0] == 1:
        runs.append(0)
    runs.extend(int(e - s) for s, e in zip(starts, ends))
    return runs


def decode_rle(runs: list[int], width: int, height: int) -> np.ndarray:
    """Inverse of encode_rle; raises ValueError on malformed runs."""
    if any(int(r) < 0 for r in runs):
        raise ValueError("negative run length")
    if sum(int(r) for r in runs) != width * height:
        raise ValueError(f"runs sum to {sum(runs)}, expected {width * height}")
    out = np.empty(width * height, dtype=bool)
    pos = 0
    val = False
    for run in runs:
        out[pos : pos + int(run)] = val
        pos += int(run)
        val = not val
    return out.reshape(height, width)


def png_b64_to_rgb(data_b64: str) -> np.ndarray:
    raw = base64.b64decode(data_b64.encode("ascii"))
    img = Image.open(io.BytesIO(raw)).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def png16_b64_to_depth_m(data_b64: str) -> np.ndarray:
    """16-bit grayscale PNG of millimeter depth -> float meters (0 = invalid)."""
    raw = base64.b64decode(data_b64.encode("ascii"))
    arr = np.asarray(Image.open(io.BytesIO(raw)))
    if arr.ndim != 2:
        raise ValueError(f"expected single-channel depth PNG, got shape {arr.shape}")
    return arr.astype(np.float64) / 1000.0
