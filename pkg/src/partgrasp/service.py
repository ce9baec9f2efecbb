"""HTTP service wrapping the pipeline for long-running, multi-client use.

Endpoints:
    GET  /healthz   liveness probe
    POST /run       run the full pipeline on a scene directory
    POST /heatmap   run up to heatmap composition, return the PNG
    POST /eval      evaluate a whole suite directory

Scene and suite paths are resolved on the server's filesystem.  A pipeline
failure is still a valid result (HTTP 200 with failure_class set); only
environmental problems map to error statuses: 404 for missing scenes,
503 when a remote model backend is unreachable.
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import __version__
from .errors import BackendUnavailableError, UsageError
from .fixtures import load_scene
from .heatmap import to_png_bytes
from .imaging import to_b64
from .model import TaskRequest
from .pipeline import PipelineConfig, build_heatmap, default_config, run_pipeline, run_suite


class RunRequest(BaseModel):
    task: str = Field(min_length=1)
    scene_dir: str
    object_hint: str | None = None
    out_dir: str | None = None
    include_timings: bool = True


class HeatmapRequest(BaseModel):
    task: str = Field(min_length=1)
    scene_dir: str
    object_hint: str | None = None


class EvalRequest(BaseModel):
    suite_dir: str
    out_dir: str | None = None


class HealthResponse(BaseModel):
    status: str
    version: str


def create_app(config: PipelineConfig | None = None) -> FastAPI:
    config = config or default_config()
    app = FastAPI(title="partgrasp", version=__version__)

    @app.get("/healthz", response_model=HealthResponse)
    def healthz() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/run")
    def run(req: RunRequest) -> JSONResponse:
        try:
            scene = load_scene(req.scene_dir)
        except (UsageError, OSError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            report = run_pipeline(
                scene,
                TaskRequest(task=req.task, object_hint=req.object_hint),
                config,
                scene_dir=req.scene_dir,
                export_dir=req.out_dir,
            )
        except BackendUnavailableError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return JSONResponse(report.to_json(include_timings=req.include_timings))

    @app.post("/heatmap")
    def heatmap(req: HeatmapRequest) -> JSONResponse:
        try:
            scene = load_scene(req.scene_dir)
        except (UsageError, OSError) as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            report, hm = build_heatmap(
                scene,
                TaskRequest(task=req.task, object_hint=req.object_hint),
                config,
                scene_dir=req.scene_dir,
            )
        except BackendUnavailableError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        body = {"report": report.to_json(), "heatmap_png_b64": None}
        if hm is not None:
            body["heatmap_png_b64"] = to_b64(to_png_bytes(hm))
            body["width"] = hm.width
            body["height"] = hm.height
        return JSONResponse(body)

    @app.post("/eval")
    def evaluate(req: EvalRequest) -> JSONResponse:
        try:
            summary = run_suite(req.suite_dir, config, export_dir=req.out_dir)
        except UsageError as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except BackendUnavailableError as exc:
            raise HTTPException(status_code=503, detail=str(exc))
        return JSONResponse(summary)

    return app
