import numpy as np
import pytest

from partgrasp.model import CameraIntrinsics, RgbdFrame, encode_mask


@pytest.fixture
def intrinsics():
    return CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0)


@pytest.fixture
def small_intrinsics():
    return CameraIntrinsics(fx=60.0, fy=60.0, cx=32.0, cy=24.0)


def make_frame(width, height, intrinsics, depth_mm=None, color=None):
    if depth_mm is None:
        depth_mm = np.full((height, width), 1000, dtype=np.uint16)
    if color is None:
        color = np.zeros((height, width, 3), dtype=np.uint8)
    return RgbdFrame(
        width=width, height=height, color=color, depth_mm=depth_mm, intrinsics=intrinsics
    )


def full_mask(width, height):
    return encode_mask(np.ones(width * height, dtype=np.uint8), width, height)


def rect_mask(width, height, u0, v0, u1, v1):
    """Mask covering pixels with u0 <= u < u1 and v0 <= v < v1."""
    m = np.zeros((height, width), dtype=np.uint8)
    m[v0:v1, u0:u1] = 1
    return encode_mask(m, width, height)


@pytest.fixture
def mask_helpers():
    return {"full": full_mask, "rect": rect_mask}
