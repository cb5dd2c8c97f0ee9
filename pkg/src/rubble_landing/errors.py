"""Exception types raised across the package."""


class LandingError(ValueError):
    """Base class; ``code`` is a short stable identifier for the failure."""

    code = "landing-error"

    def __init__(self, message: str | None = None):
        super().__init__(message or self.code)


class InvalidDepthError(LandingError):
    code = "invalid-depth"


class OutOfBoundsError(LandingError):
    code = "out-of-bounds"


class EmptyDepthError(LandingError):
    code = "empty-depth"


class ShapeMismatchError(LandingError):
    code = "shape-mismatch"


class NoSitesError(LandingError):
    code = "no-sites"


class GoalOccupiedError(LandingError):
    code = "goal-occupied"


class NoPathError(LandingError):
    code = "no-path"
