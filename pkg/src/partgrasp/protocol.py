"""Wire-format parsing and validation for the two model-backend protocols.

Segmentation service:
    POST /segment   {"image_png_b64": str, "queries": [str, ...]}
                 -> {"segments": [{"label", "confidence", "mask_rle", "width", "height"}]}

Grasp proposal service:
    POST /grasps    {"depth_png16_b64": str, "intrinsics": {fx, fy, cx, cy},
                     "object_mask_rle": [int, ...]}
                 -> {"candidates": [{"id", "pose": {"quaternion", "translation"},
                                     "contact_point", "confidence"}]}

These parsers are the single source of truth for payload validity: the
fixture backends, the remote clients, and the sidecar conformance tests all
go through them.
"""

from __future__ import annotations

from .errors import (
    DimensionError,
    MalformedCandidateError,
    MalformedMaskError,
    MalformedSegmentationError,
)
from .model import BinaryMask, GraspCandidate, PartSegment


def parse_segmentation_response(payload) -> list[PartSegment]:
    """Validate a /segment response body and return its detections in order.

    Multiple entries per label are allowed (one per instance); deduplication
    is the client's job, not the protocol's.
    """
    if not isinstance(payload, dict) or "segments" not in payload:
        raise MalformedSegmentationError("response must be an object with a 'segments' list")
    entries = payload["segments"]
    if not isinstance(entries, list):
        raise MalformedSegmentationError("'segments' must be a list")
    segments: list[PartSegment] = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise MalformedSegmentationError(f"segment {i} is not an object")
        try:
            label = entry["label"]
            confidence = entry["confidence"]
            runs = entry["mask_rle"]
            width = int(entry["width"])
            height = int(entry["height"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSegmentationError(f"segment {i}: missing or bad field ({exc})") from exc
        if not isinstance(label, str) or not label:
            raise MalformedSegmentationError(f"segment {i}: label must be a non-empty string")
        if not isinstance(confidence, (int, float)) or not (0.0 <= float(confidence) <= 1.0):
            raise MalformedSegmentationError(
                f"segment {i} ({label!r}): confidence {confidence!r} outside [0, 1]"
            )
        if not isinstance(runs, list) or not all(isinstance(r, int) for r in runs):
            raise MalformedSegmentationError(f"segment {i} ({label!r}): mask_rle must be ints")
        try:
            mask = BinaryMask(width=width, height=height, runs=tuple(runs))
        except (MalformedMaskError, DimensionError) as exc:
            raise MalformedSegmentationError(f"segment {i} ({label!r}): {exc}") from exc
        segments.append(PartSegment(label=label, mask=mask, confidence=float(confidence)))
    return segments


def parse_candidates_payload(payload) -> list[GraspCandidate]:
    """Validate grasp candidates from either a bare JSON list (file form)
    or a {"candidates": [...]} object (wire form).  Ids must be unique."""
    if isinstance(payload, dict):
        if "candidates" not in payload:
            raise MalformedCandidateError("object payload must carry a 'candidates' list")
        payload = payload["candidates"]
    if not isinstance(payload, list):
        raise MalformedCandidateError("candidate payload must be a list")
    candidates = [GraspCandidate.from_json(entry) for entry in payload]
    ids = [c.id for c in candidates]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise MalformedCandidateError(f"duplicate candidate ids: {dupes}")
    return candidates
