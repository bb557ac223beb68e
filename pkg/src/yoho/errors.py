"""Exception types shared across the pipeline."""


class YohoError(Exception):
    """Base class for all pipeline errors."""


class MalformedAnnotation(YohoError):
    """Annotation document is syntactically invalid."""


class MissingImage(YohoError):
    """Referenced image file does not exist or cannot be decoded."""


class InvariantViolation(YohoError):
    """A hard structural invariant of the input data does not hold."""


class DegeneratePolygon(YohoError):
    """Polygon rasterizes to zero area."""


class SeedTooSmall(YohoError):
    """A cut lesion seed has a degenerate mask (< 9 px)."""


class SourceTooSmall(YohoError):
    """Sample circle too small to cut any seed from."""


class NoPlacementPossible(YohoError):
    """Not a single seed could be placed on a render target."""


class IoFailure(YohoError):
    """Filesystem read/write failure while emitting artifacts."""


class ShapeError(YohoError):
    """Array arguments have incompatible or unsupported shapes."""


class CheckpointMismatch(YohoError):
    """Stored parameters disagree with the requested network config."""


class AllIgnored(YohoError):
    """Loss requested over an empty set of non-ignored pixels."""


class DegenerateTarget(YohoError):
    """Edge target is single-class; callers normally get the fallback path."""


class NonFiniteLoss(YohoError):
    """Training aborted because the loss went NaN/inf."""

    def __init__(self, step: int, phase: int, breakdown=None):
        self.step = step
        self.phase = phase
        self.breakdown = breakdown
        super().__init__(f"non-finite loss at phase {phase} step {step}: {breakdown}")


class MissingPair(YohoError):
    """Evaluation could not match a prediction with its ground truth."""


class EmptyGroundTruth(YohoError):
    """Metric undefined for an empty ground-truth mask."""
