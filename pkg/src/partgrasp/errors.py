"""Exception hierarchy shared across the package.

Every error the pipeline can surface maps to one of these classes; the CLI
translates them into exit codes (see ``partgrasp.cli``).
"""


class PartGraspError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(PartGraspError):
    """Bad invocation: missing files, empty suites, malformed config."""


class DimensionError(PartGraspError):
    """Raster or mask dimensions disagree with the declared width/height."""


class MalformedMaskError(PartGraspError):
    """Run-length data does not describe a valid binary mask."""


class BehindCameraError(PartGraspError):
    """Attempted to project a point with z <= 0."""


class InvalidDepthError(PartGraspError):
    """Attempted to deproject with a non-positive depth."""


class EmptyCloudError(PartGraspError):
    """An object point cloud with zero valid points was produced or required."""


class BackendUnavailableError(PartGraspError):
    """Transport-level failure talking to a remote backend."""


class MalformedDecompositionError(PartGraspError):
    """The language backend's reply could not be parsed into a decomposition."""


class InvalidDecompositionError(PartGraspError):
    """Parsed decomposition violates its invariants (e.g. no graspable part)."""


class MalformedSegmentationError(PartGraspError):
    """Segmentation backend returned a payload violating the wire contract."""


class NoObjectSegmentError(PartGraspError):
    """The whole-object query produced no segment; the heatmap base term is impossible."""


class NoCandidatesError(PartGraspError):
    """Grasp selection was requested but no candidates exist."""


class MalformedCandidateError(PartGraspError):
    """Grasp candidate payload violates the candidate JSON schema."""


class SceneGenerationError(PartGraspError):
    """Synthetic scene generation could not satisfy the requested geometry."""
