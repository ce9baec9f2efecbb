"""Command-line surface.

Subcommands: run (one scene), eval (suite), heatmap (PNG only),
gen-fixtures (bundled synthetic suite), serve (HTTP service).

run/eval/heatmap execute in-process by default; pass --server URL to act as
a thin client against a running `partgrasp serve` instance instead.

Exit codes: 0 success, 2 usage error, 3 backend unavailable,
4 pipeline failure class raised.
"""

from __future__ import annotations

import argparse
import sys

import requests

from .errors import BackendUnavailableError, PartGraspError, UsageError
from .fixtures import generate_bundled_suite, load_scene
from .heatmap import export as export_heatmap
from .model import TaskRequest
from .pipeline import (
    PipelineConfig,
    build_heatmap,
    default_config,
    load_config,
    run_pipeline,
    run_suite,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_BACKEND = 3
EXIT_PIPELINE = 4


def _config_from_args(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return default_config()


def _print_report_summary(report: dict) -> None:
    print(f"task: {report['task']}")
    decomposition = report.get("decomposition")
    if decomposition:
        print(
            f"object: {decomposition['object']}  "
            f"grasp: {', '.join(decomposition['grasp_parts'])}  "
            f"avoid: {', '.join(decomposition['avoid_parts']) or '-'}"
        )
    segmentation = report.get("segmentation")
    if segmentation:
        labels = {
            s["label"]: round(s["confidence"], 3) for s in segmentation["part_segments"]
        }
        print(f"segments: {labels}  missing: {segmentation['missing_labels'] or '-'}")
    selected = report.get("selected_grasp")
    if selected:
        c = selected["candidate"]
        print(
            f"selected grasp: id={c['id']}  contact={selected['contact_score']:.1f}  "
            f"zaxis={selected['zaxis_score']:.1f}  total={selected['total_score']:.1f}"
        )
    if report.get("failure_class"):
        print(f"FAILURE: {report['failure_class']}")
    for w in report.get("warnings", []):
        print(f"warning: {w}")
    timings = report.get("timings_ms")
    if timings:
        joined = "  ".join(f"{k}={v:.1f}" for k, v in timings.items())
        print(f"timings ms: {joined}")


def _post(server: str, route: str, body: dict) -> dict:
    url = server.rstrip("/") + route
    try:
        resp = requests.post(url, json=body, timeout=600)
    except requests.RequestException as exc:
        raise BackendUnavailableError(f"cannot reach server {server}: {exc}") from exc
    if resp.status_code == 503:
        raise BackendUnavailableError(resp.json().get("detail", "backend unavailable"))
    if resp.status_code == 400 or resp.status_code == 404 or resp.status_code == 422:
        raise UsageError(f"server rejected request: {resp.text[:300]}")
    if resp.status_code != 200:
        raise BackendUnavailableError(f"server error {resp.status_code}: {resp.text[:300]}")
    return resp.json()


def _cmd_run(args) -> int:
    if args.server:
        report = _post(
            args.server,
            "/run",
            {"task": args.task, "scene_dir": args.scene, "out_dir": args.out},
        )
    else:
        config = _config_from_args(args)
        scene = load_scene(args.scene)
        result = run_pipeline(
            scene,
            TaskRequest(task=args.task),
            config,
            scene_dir=args.scene,
            export_dir=args.out,
        )
        report = result.to_json()
    _print_report_summary(report)
    if args.out and not args.server:
        print(f"report written to {args.out}/report.json")
    return EXIT_PIPELINE if report.get("failure_class") else EXIT_OK


def _cmd_eval(args) -> int:
    if args.server:
        summary = _post(args.server, "/eval", {"suite_dir": args.suite, "out_dir": args.out})
    else:
        config = _config_from_args(args)
        summary = run_suite(args.suite, config, export_dir=args.out)
    print(f"scenes: {summary['scene_count']}")
    print(f"part selection: {summary['part_selection_rate']:.1%}")
    if summary["winner_agreement_rate"] is not None:
        print(f"winner agreement: {summary['winner_agreement_rate']:.1%}")
    for group, stats in summary["groups"].items():
        print(
            f"  [{group}] scenes={stats['scene_count']} "
            f"part_selection={stats['part_selection_rate']:.1%}"
        )
    timings = summary.get("mean_stage_timings_ms", {})
    if timings:
        print("mean stage ms: " + "  ".join(f"{k}={v:.1f}" for k, v in timings.items()))
    return EXIT_OK


def _cmd_heatmap(args) -> int:
    if args.server:
        body = _post(args.server, "/heatmap", {"task": args.task, "scene_dir": args.scene})
        if body.get("heatmap_png_b64") is None:
            _print_report_summary(body["report"])
            return EXIT_PIPELINE
        from .imaging import from_b64

        with open(args.out, "wb") as f:
            f.write(from_b64(body["heatmap_png_b64"]))
        print(f"heatmap written to {args.out}")
        return EXIT_OK
    config = _config_from_args(args)
    scene = load_scene(args.scene)
    report, heatmap = build_heatmap(
        scene, TaskRequest(task=args.task), config, scene_dir=args.scene
    )
    if heatmap is None:
        _print_report_summary(report.to_json())
        return EXIT_PIPELINE
    sidecar = export_heatmap(heatmap, config.heatmap, args.out)
    print(f"heatmap written to {args.out} (params: {sidecar})")
    return EXIT_OK


def _cmd_gen_fixtures(args) -> int:
    written = generate_bundled_suite(args.out, seed=args.seed)
    print(f"wrote {len(written)} scenes under {args.out}")
    for path in written:
        print(f"  {path}")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _config_from_args(args)
    uvicorn.run(create_app(config), host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="partgrasp", description="Task-conditioned grasp filtering"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the pipeline on one scene directory")
    run_p.add_argument("--scene", required=True, help="scene fixture directory")
    run_p.add_argument("--task", required=True, help="natural-language task")
    run_p.add_argument("--config", help="pipeline config JSON")
    run_p.add_argument("--out", help="directory for report.json + heatmap.png")
    run_p.add_argument("--server", help="run against a partgrasp serve instance")
    run_p.set_defaults(func=_cmd_run)

    eval_p = sub.add_parser("eval", help="evaluate a suite of scenes")
    eval_p.add_argument("--suite", required=True, help="suite root directory")
    eval_p.add_argument("--config", help="pipeline config JSON")
    eval_p.add_argument("--out", help="directory for per-scene and suite reports")
    eval_p.add_argument("--server", help="run against a partgrasp serve instance")
    eval_p.set_defaults(func=_cmd_eval)

    hm_p = sub.add_parser("heatmap", help="emit only the affordance heatmap PNG")
    hm_p.add_argument("--scene", required=True)
    hm_p.add_argument("--task", required=True)
    hm_p.add_argument("--config", help="pipeline config JSON")
    hm_p.add_argument("--out", required=True, help="output PNG path")
    hm_p.add_argument("--server", help="run against a partgrasp serve instance")
    hm_p.set_defaults(func=_cmd_heatmap)

    gen_p = sub.add_parser("gen-fixtures", help="generate the bundled synthetic suite")
    gen_p.add_argument("--out", required=True, help="suite output directory")
    gen_p.add_argument("--seed", type=int, default=0)
    gen_p.set_defaults(func=_cmd_gen_fixtures)

    serve_p = sub.add_parser("serve", help="start the HTTP service")
    serve_p.add_argument("--config", help="pipeline config JSON")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8080)
    serve_p.set_defaults(func=_cmd_serve)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors, 0 on --help
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BackendUnavailableError as exc:
        print(f"backend unavailable: {exc}", file=sys.stderr)
        return EXIT_BACKEND
    except PartGraspError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
