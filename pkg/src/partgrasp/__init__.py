"""Task-conditioned grasp filtering.

Given an RGB-D frame and a natural-language task, decompose the relevant
object into parts to grasp and parts to avoid, obtain part masks from a
segmentation backend, compose a confidence-weighted affordance heatmap, and
rank 6-DOF grasp candidates by reprojecting their contact points and
approach axes into that heatmap.
"""

from .errors import PartGraspError
from .model import (
    AffordanceHeatmap,
    BinaryMask,
    CameraIntrinsics,
    GraspCandidate,
    ObjectPointCloud,
    PartDecomposition,
    PartSegment,
    RankedGrasp,
    RgbdFrame,
    TaskRequest,
    decode_mask,
    encode_mask,
)

__version__ = "0.1.0"

__all__ = [
    "AffordanceHeatmap",
    "BinaryMask",
    "CameraIntrinsics",
    "GraspCandidate",
    "ObjectPointCloud",
    "PartDecomposition",
    "PartGraspError",
    "PartSegment",
    "RankedGrasp",
    "RgbdFrame",
    "TaskRequest",
    "decode_mask",
    "encode_mask",
    "__version__",
]
