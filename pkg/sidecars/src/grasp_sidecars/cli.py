"""Serve the sidecars: `grasp-sidecars serve-segmentation | serve-grasps`."""

from __future__ import annotations

import argparse
import json
import sys

import uvicorn

from .config import SidecarConfig
from .grasp_server import create_grasp_app
from .segmentation_server import create_segmentation_app


def _common_args(parser: argparse.ArgumentParser, default_model: str) -> None:
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8090)
    parser.add_argument("--model", default=default_model, help="registry name or module:factory")
    parser.add_argument("--device", default="cpu")
    parser.add_argument(
        "--no-clamp",
        action="store_true",
        help="do not clamp model confidences into [0, 1]",
    )
    parser.add_argument(
        "--options",
        default="{}",
        help='model options as inline JSON, e.g. \'{"palette": "scene/palette.json"}\'',
    )


def _config_from(args) -> SidecarConfig:
    try:
        options = json.loads(args.options)
    except json.JSONDecodeError as exc:
        raise SystemExit(f"--options is not valid JSON: {exc}")
    return SidecarConfig(
        host=args.host,
        port=args.port,
        model=args.model,
        device=args.device,
        clamp_confidence=not args.no_clamp,
        options=options,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="grasp-sidecars")
    sub = parser.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("serve-segmentation", help="serve POST /segment")
    _common_args(seg, default_model="color-lut")
    seg.add_argument("--palette", help="shortcut for options.palette (JSON file)")

    gr = sub.add_parser("serve-grasps", help="serve POST /grasps")
    _common_args(gr, default_model="masked-depth")

    args = parser.parse_args(argv)
    config = _config_from(args)
    if args.command == "serve-segmentation":
        if getattr(args, "palette", None):
            options = dict(config.options)
            options["palette"] = args.palette
            config = SidecarConfig(
                host=config.host,
                port=config.port,
                model=config.model,
                device=config.device,
                clamp_confidence=config.clamp_confidence,
                options=options,
            )
        app = create_segmentation_app(config)
    else:
        app = create_grasp_app(config)
    uvicorn.run(app, host=config.host, port=config.port)
    return 0


def entrypoint() -> None:
    sys.exit(main(sys.argv[1:]))


if __name__ == "__main__":
    entrypoint()
