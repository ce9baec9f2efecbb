"""Segmentation backend: object + part masks with confidences.

The whole-object name is always queried alongside the part labels because the
heatmap's base term needs the object mask.  Per label only the single
highest-confidence detection is kept; parts that produce nothing (or fall
below ``min_confidence``) land in ``missing_labels``.  A missing whole-object
segment is fatal.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import requests

from .errors import (
    BackendUnavailableError,
    MalformedSegmentationError,
    NoObjectSegmentError,
    UsageError,
)
from .imaging import encode_png_rgb, to_b64
from .model import BinaryMask, PartSegment, RgbdFrame
from .protocol import parse_segmentation_response


@dataclass(frozen=True)
class SegmentationBackendConfig:
    kind: str
    endpoint_url: str | None = None
    fixture_dir: str | None = None
    min_confidence: float = 0.0
    request_timeout: float = 30.0

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "fixture"):
            raise UsageError(f"segmentation backend kind must be remote|fixture, got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint_url:
            raise UsageError("remote segmentation backend needs endpoint_url")
        if self.kind == "fixture" and not self.fixture_dir:
            raise UsageError("fixture segmentation backend needs fixture_dir")
        if not (0.0 <= self.min_confidence <= 1.0):
            raise UsageError(f"min_confidence {self.min_confidence} outside [0, 1]")
        if self.request_timeout <= 0:
            raise UsageError("request_timeout must be positive")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint_url": self.endpoint_url,
            "fixture_dir": self.fixture_dir,
            "min_confidence": self.min_confidence,
            "request_timeout": self.request_timeout,
        }

    @classmethod
    def from_json(cls, d: dict) -> "SegmentationBackendConfig":
        return cls(
            kind=str(d["kind"]),
            endpoint_url=d.get("endpoint_url"),
            fixture_dir=d.get("fixture_dir"),
            min_confidence=float(d.get("min_confidence", 0.0)),
            request_timeout=float(d.get("request_timeout", 30.0)),
        )


@dataclass(frozen=True)
class SegmentationResult:
    object_segment: PartSegment | None
    part_segments: tuple[PartSegment, ...]
    missing_labels: tuple[str, ...] = field(default=())

    def to_json(self) -> dict:
        return {
            "object_segment": self.object_segment.to_json() if self.object_segment else None,
            "part_segments": [s.to_json() for s in self.part_segments],
            "missing_labels": list(self.missing_labels),
        }


def segment(
    frame: RgbdFrame,
    object_name: str,
    part_labels: list[str],
    config: SegmentationBackendConfig,
) -> SegmentationResult:
    """Query the backend for the object mask and one mask per part label."""
    if not part_labels:
        raise UsageError("part_labels must be non-empty")
    object_name = object_name.strip().lower()
    labels: list[str] = []
    for raw in part_labels:
        label = raw.strip().lower()
        if label and label not in labels:
            labels.append(label)

    if config.kind == "fixture":
        detections = _segment_fixture(frame, [object_name] + labels, config)
    else:
        detections = _segment_remote(frame, [object_name] + labels, config)

    # keep the single best detection per label (first wins on equal confidence)
    best: dict[str, PartSegment] = {}
    for det in detections:
        if det.label not in best or det.confidence > best[det.label].confidence:
            best[det.label] = det

    object_segment = best.get(object_name)
    if object_segment is None:
        raise NoObjectSegmentError(f"no segment produced for whole object {object_name!r}")

    parts: list[PartSegment] = []
    missing: list[str] = []
    for label in labels:
        if label == object_name:
            parts.append(object_segment)
            continue
        seg = best.get(label)
        if seg is None or seg.confidence < config.min_confidence:
            missing.append(label)
        else:
            parts.append(seg)
    return SegmentationResult(
        object_segment=object_segment,
        part_segments=tuple(parts),
        missing_labels=tuple(missing),
    )


def _check_frame_dims(frame: RgbdFrame, det: PartSegment) -> PartSegment:
    if (det.mask.width, det.mask.height) != (frame.width, frame.height):
        raise MalformedSegmentationError(
            f"segment {det.label!r} is {det.mask.width}x{det.mask.height}, "
            f"frame is {frame.width}x{frame.height}"
        )
    return det


def _segment_fixture(
    frame: RgbdFrame, queries: list[str], config: SegmentationBackendConfig
) -> list[PartSegment]:
    confidences_path = os.path.join(config.fixture_dir, "confidences.json")
    confidences: dict = {}
    if os.path.exists(confidences_path):
        with open(confidences_path) as f:
            confidences = json.load(f)
    detections: list[PartSegment] = []
    for label in queries:
        mask_path = os.path.join(config.fixture_dir, f"{label}.mask.json")
        if not os.path.exists(mask_path):
            continue
        with open(mask_path) as f:
            d = json.load(f)
        try:
            mask = BinaryMask(
                width=int(d["width"]), height=int(d["height"]), runs=tuple(d["mask_rle"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSegmentationError(f"bad mask fixture {mask_path}: {exc}") from exc
        conf = float(confidences.get(label, 1.0))
        detections.append(
            _check_frame_dims(frame, PartSegment(label=label, mask=mask, confidence=conf))
        )
    return detections


def _segment_remote(
    frame: RgbdFrame, queries: list[str], config: SegmentationBackendConfig
) -> list[PartSegment]:
    body = {
        "image_png_b64": to_b64(encode_png_rgb(frame.color)),
        "queries": queries,
    }
    url = config.endpoint_url.rstrip("/") + "/segment"
    try:
        resp = requests.post(url, json=body, timeout=config.request_timeout)
    except requests.RequestException as exc:
        raise BackendUnavailableError(f"segmentation endpoint unreachable: {exc}") from exc
    if resp.status_code != 200:
        raise BackendUnavailableError(
            f"segmentation endpoint returned {resp.status_code}: {resp.text[:200]}"
        )
    try:
        payload = resp.json()
    except ValueError as exc:
        raise MalformedSegmentationError(f"segmentation reply is not JSON: {exc}") from exc
    detections = parse_segmentation_response(payload)
    for det in detections:
        if det.label not in queries:
            raise MalformedSegmentationError(
                f"segmentation returned unqueried label {det.label!r}"
            )
        _check_frame_dims(frame, det)
    return detections
