"""Grasp candidate scoring and ranking against a finalized affordance heatmap.

Each candidate gets a contact score (heatmap at the reprojected contact
point), an approach-axis score (heatmap at the pixel of the cloud point
nearest the line extending the gripper z-axis), and their sum as the total.
Candidates sort by total score, with deterministic tie-breaking.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import BehindCameraError, UsageError
from .geometry import Line3, nearest_point_to_line, project
from .heatmap import pixel_index, sample
from .model import (
    AffordanceHeatmap,
    CameraIntrinsics,
    GraspCandidate,
    ObjectPointCloud,
    RankedGrasp,
)

TIE_BREAK = "generator_confidence_then_id"


@dataclass(frozen=True)
class RankingConfig:
    zaxis_mode: str = "line"
    tie_break: str = TIE_BREAK

    def __post_init__(self) -> None:
        if self.zaxis_mode not in ("line", "ray"):
            raise UsageError(f"zaxis_mode must be 'line' or 'ray', got {self.zaxis_mode!r}")
        if self.tie_break != TIE_BREAK:
            raise UsageError(f"unsupported tie_break {self.tie_break!r}")

    def to_json(self) -> dict:
        return {"zaxis_mode": self.zaxis_mode, "tie_break": self.tie_break}

    @classmethod
    def from_json(cls, d: dict) -> "RankingConfig":
        return cls(
            zaxis_mode=str(d.get("zaxis_mode", "line")),
            tie_break=str(d.get("tie_break", TIE_BREAK)),
        )


def score_candidate(
    candidate: GraspCandidate,
    heatmap: AffordanceHeatmap,
    cloud: ObjectPointCloud,
    intrinsics: CameraIntrinsics,
    config: RankingConfig = RankingConfig(),
    warnings: list[str] | None = None,
) -> RankedGrasp:
    """Score one candidate; pure given its inputs.

    A contact point behind the camera contributes 0 instead of aborting, so a
    single degenerate candidate cannot poison ranking of the rest.
    """
    try:
        u, v = project(candidate.contact_point, intrinsics)
        contact_pixel = pixel_index(u, v)
        contact_score = sample(heatmap, (u, v))
    except BehindCameraError:
        contact_pixel = None
        contact_score = 0.0
        if warnings is not None:
            warnings.append(f"candidate {candidate.id}: contact point behind camera, contact score 0")

    approach = Line3(origin=candidate.translation, direction=candidate.approach_axis())
    nearest = nearest_point_to_line(cloud, approach, mode=config.zaxis_mode)
    zaxis_score = sample(heatmap, nearest.pixel)

    return RankedGrasp(
        candidate=candidate,
        contact_score=contact_score,
        zaxis_score=zaxis_score,
        total_score=contact_score + zaxis_score,
        contact_pixel=contact_pixel,
        zaxis_pixel=nearest.pixel,
    )


def rank(
    candidates: list[GraspCandidate],
    heatmap: AffordanceHeatmap,
    cloud: ObjectPointCloud,
    intrinsics: CameraIntrinsics,
    config: RankingConfig = RankingConfig(),
    warnings: list[str] | None = None,
) -> list[RankedGrasp]:
    """Score all candidates and sort best-first.

    Order: descending total score, then descending generator confidence,
    then ascending id — fully deterministic regardless of input order.
    An empty candidate list ranks to an empty list; selection decides
    whether that is fatal.
    """
    scored = [
        score_candidate(c, heatmap, cloud, intrinsics, config, warnings) for c in candidates
    ]
    scored.sort(
        key=lambda r: (-r.total_score, -r.candidate.generator_confidence, r.candidate.id)
    )
    return scored


def load_candidates_file(path: str) -> list[GraspCandidate]:
    """Read the candidate JSON list format produced by grasp generators."""
    import json

    from .protocol import parse_candidates_payload

    with open(path) as f:
        payload = json.load(f)
    return parse_candidates_payload(payload)
