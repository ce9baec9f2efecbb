"""Grasp proposal sidecar: POST /grasps, GET /healthz.

Request:  {"depth_png16_b64": str(16-bit mm PNG), "intrinsics": {fx, fy, cx, cy},
           "object_mask_rle": [int, ...]}
Response: {"candidates": [{"id", "pose": {"quaternion"(wxyz), "translation"},
                           "contact_point", "confidence"}]}

Contact points and translations are camera-frame meters.  Quaternions are
normalized server-side, so clients may rely on unit norm within 1e-6.
Zero proposals is a valid answer ({"candidates": []}, HTTP 200).
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .config import SidecarConfig
from .models import GRASP_MODELS, load_model
from .wire import decode_rle, png16_b64_to_depth_m


class IntrinsicsBody(BaseModel):
    fx: float
    fy: float
    cx: float
    cy: float


class GraspRequest(BaseModel):
    depth_png16_b64: str
    intrinsics: IntrinsicsBody
    object_mask_rle: list[int]


def create_grasp_app(config: SidecarConfig, model=None) -> FastAPI:
    proposer = model if model is not None else load_model(
        config.model, GRASP_MODELS, config.options
    )
    app = FastAPI(title="grasp-sidecar", version=__version__)

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "model": config.model}

    @app.post("/grasps")
    def grasps(req: GraspRequest) -> dict:
        try:
            depth_m = png16_b64_to_depth_m(req.depth_png16_b64)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"bad depth payload: {exc}")
        height, width = depth_m.shape
        try:
            mask = decode_rle(req.object_mask_rle, width, height)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=f"bad object mask: {exc}")
        candidates = proposer.propose(depth_m, req.intrinsics.model_dump(), mask)
        for cand in candidates:
            q = np.asarray(cand["pose"]["quaternion"], dtype=np.float64)
            norm = float(np.linalg.norm(q))
            if norm == 0:
                raise HTTPException(status_code=500, detail="model produced a zero quaternion")
            cand["pose"]["quaternion"] = [float(v) for v in q / norm]
            if config.clamp_confidence:
                cand["confidence"] = min(1.0, max(0.0, float(cand["confidence"])))
        return {"candidates": candidates}

    return app
