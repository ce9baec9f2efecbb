import base64
import io
import json

import numpy as np
import pytest
from PIL import Image

from grasp_sidecars.config import SidecarConfig


def rgb_png_b64(arr: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(arr.astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def depth_png16_b64(depth_mm: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(depth_mm.astype(np.uint16)).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


@pytest.fixture
def flat_scene(tmp_path):
    """Tiny flat-shaded scene: red handle, blue blade on gray background."""
    w, h = 32, 24
    img = np.full((h, w, 3), 70, dtype=np.uint8)
    handle = np.zeros((h, w), dtype=bool)
    blade = np.zeros((h, w), dtype=bool)
    handle[8:16, 4:14] = True
    blade[8:16, 14:28] = True
    img[handle] = (204, 61, 61)
    img[blade] = (61, 133, 204)
    palette = {
        "handle": [[204, 61, 61]],
        "blade": [[61, 133, 204]],
        "knife": [[204, 61, 61], [61, 133, 204]],
    }
    palette_path = tmp_path / "palette.json"
    palette_path.write_text(json.dumps(palette))
    return {
        "image": img,
        "handle": handle,
        "blade": blade,
        "palette_path": str(palette_path),
        "width": w,
        "height": h,
    }


@pytest.fixture
def seg_config(flat_scene):
    return SidecarConfig(
        port=0, model="color-lut", options={"palette": flat_scene["palette_path"]}
    )


@pytest.fixture
def grasp_config():
    return SidecarConfig(port=0, model="masked-depth", options={"max_candidates": 6})
