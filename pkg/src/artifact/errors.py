"""Exception types raised across the package."""


class PlannerError(Exception):
    """Base class for all package errors."""


class ParseError(PlannerError):
    """A document could not be parsed."""


class ValidationError(PlannerError):
    """A parsed document or object violates an invariant."""


class DimensionMismatch(PlannerError, ValueError):
    """Joint vector length does not match the robot."""


class DuplicateId(PlannerError, KeyError):
    pass


class UnknownId(PlannerError, KeyError):
    pass


class OverlappingScript(PlannerError):
    """Two motion scripts on one obstacle overlap in time."""


class Unreachable(PlannerError):
    """No IK seed converged to the goal."""

    def __init__(self, message: str, best_residual: float = float("inf")):
        super().__init__(message)
        self.best_residual = best_residual


class LineSearchFailed(PlannerError):
    pass


class PlanFailed(PlannerError):
    pass


class ConfigError(PlannerError):
    """A task, weight, or episode file could not be loaded."""
