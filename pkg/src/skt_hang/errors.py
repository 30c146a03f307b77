"""Exception hierarchy shared across the pipeline."""


class SktHangError(Exception):
    """Base class for all pipeline errors."""


class DegenerateForward(SktHangError):
    """Forward direction is (nearly) parallel to gravity or zero."""


class DegenerateTrajectory(SktHangError):
    """All trajectory waypoints coincide; no motion direction exists."""


class DegeneratePath(SktHangError):
    """Path has zero total arc length and cannot be resampled."""


class EmptyView(SktHangError):
    """No surface point of the item is visible from the camera."""


class InsufficientPoints(SktHangError):
    """Fewer input points than the requested sample count."""


class AllNoise(SktHangError):
    """Density clustering found no core point; every point is noise."""


class NoStableContact(SktHangError):
    """Gravity settling never reached a resting contact on the item."""


class InvalidTrajectory(SktHangError):
    """Trajectory is unusable for execution (too short or not augmented)."""


class PlanningTimeout(SktHangError):
    """Planner exhausted its iteration budget without connecting."""


class InvalidGoal(SktHangError):
    """Goal pose violates the collision tolerance."""


class TooFewPoints(SktHangError):
    """Point cloud is too small for the encoder configuration."""


class ShapeMismatch(SktHangError):
    """Array shapes are inconsistent with the model configuration."""


class MissingTrace(SktHangError):
    """Backward pass called without cached forward intermediates."""


class NonFiniteLoss(SktHangError):
    """Training loss became NaN or infinite."""


class TooFewItems(SktHangError):
    """Dataset too small to split into non-empty train/val/test parts."""


class ConfigInvalid(SktHangError):
    """Configuration file rejected; message names the field and reason."""

    def __init__(self, field: str, reason: str):
        self.field = field
        self.reason = reason
        super().__init__(f"invalid config field '{field}': {reason}")


class StaleArtifact(SktHangError):
    """Upstream artifact was produced under a different config or version."""

    def __init__(self, path: str, expected: str, found: str):
        self.path = path
        self.expected = expected
        self.found = found
        super().__init__(
            f"stale artifact {path}: expected digest {expected}, found {found}"
        )
