"""Segmentation sidecar: POST /segment, GET /healthz.

Request:  {"image_png_b64": str, "queries": [str, ...]}
Response: {"segments": [{"label", "confidence", "mask_rle", "width", "height"}]}

One entry per detected instance; confidences are clamped to [0, 1] when the
config says so.  Empty queries are a contract violation (400); unexpected
errors return JSON 500 bodies.  The server keeps no state between requests.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from . import __version__
from .config import SidecarConfig
from .models import SEGMENTATION_MODELS, load_model
from .wire import encode_rle, png_b64_to_rgb


class SegmentRequest(BaseModel):
    image_png_b64: str
    queries: list[str]


def create_segmentation_app(config: SidecarConfig, model=None) -> FastAPI:
    segmenter = model if model is not None else load_model(
        config.model, SEGMENTATION_MODELS, config.options
    )
    app = FastAPI(title="segmentation-sidecar", version=__version__)

    @app.exception_handler(Exception)
    async def internal_error(request: Request, exc: Exception) -> JSONResponse:
        return JSONResponse(status_code=500, content={"error": str(exc)})

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "model": config.model}

    @app.post("/segment")
    def segment(req: SegmentRequest) -> dict:
        if not req.queries:
            raise HTTPException(status_code=400, detail="queries must be non-empty")
        try:
            image = png_b64_to_rgb(req.image_png_b64)
        except Exception as exc:
            raise HTTPException(status_code=400, detail=f"bad image payload: {exc}")
        height, width = image.shape[:2]
        entries = []
        for label, mask, confidence in segmenter.segment(image, req.queries):
            if config.clamp_confidence:
                confidence = min(1.0, max(0.0, float(confidence)))
            entries.append(
                {
                    "label": label,
                    "confidence": float(confidence),
                    "mask_rle": encode_rle(mask),
                    "width": width,
                    "height": height,
                }
            )
        return {"segments": entries}

    return app
