"""Lossless raster I/O: PNG (via Pillow) and 16-bit PGM used by scene fixtures."""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import UsageError


def encode_png_rgb(arr: np.ndarray) -> bytes:
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise UsageError(f"expected uint8 HxWx3 array, got {arr.dtype} {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png_rgb(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data)).convert("RGB")
    return np.asarray(img, dtype=np.uint8)


def encode_png_gray16(arr: np.ndarray) -> bytes:
    if arr.ndim != 2 or arr.dtype != np.uint16:
        raise UsageError(f"expected uint16 HxW array, got {arr.dtype} {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr).save(buf, format="PNG")
    return buf.getvalue()


def decode_png_gray16(data: bytes) -> np.ndarray:
    img = Image.open(io.BytesIO(data))
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise UsageError(f"expected single-channel PNG, got shape {arr.shape}")
    return arr.astype(np.uint16)


def encode_png_gray8(arr: np.ndarray) -> bytes:
    if arr.ndim != 2 or arr.dtype != np.uint8:
        raise UsageError(f"expected uint8 HxW array, got {arr.dtype} {arr.shape}")
    buf = io.BytesIO()
    Image.fromarray(arr, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def to_b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def from_b64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


def write_pgm16(path: str, arr: np.ndarray) -> None:
    """Write a 16-bit binary PGM (P5, maxval 65535, big-endian samples)."""
    if arr.ndim != 2 or arr.dtype != np.uint16:
        raise UsageError(f"expected uint16 HxW array, got {arr.dtype} {arr.shape}")
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
        f.write(arr.astype(">u2").tobytes())


def read_pgm16(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    # Header: magic, width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed between them.
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise UsageError(f"truncated PGM header in {path}")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    if tokens[0] != b"P5":
        raise UsageError(f"not a binary PGM: {path}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 65535:
        raise UsageError(f"expected 16-bit PGM (maxval 65535), got {maxval} in {path}")
    raw = data[pos : pos + 2 * w * h]
    if len(raw) != 2 * w * h:
        raise UsageError(f"truncated PGM payload in {path}")
    return np.frombuffer(raw, dtype=">u2").reshape(h, w).astype(np.uint16)
