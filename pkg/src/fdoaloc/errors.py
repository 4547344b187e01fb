"""Exception types shared across the package."""


class FdoalocError(Exception):
    """Base class for all package errors."""


class SingularGeometryError(FdoalocError):
    """Emitter coincides with a receiver position (zero range)."""


class DegeneratePairError(FdoalocError):
    """A receiver pair is unusable, e.g. duplicate positions."""


class DimensionMismatchError(FdoalocError):
    """Vector or system dimensions do not agree."""


class InvalidSystemError(FdoalocError):
    """A polynomial system violates a solver precondition."""


class ScenarioFormatError(FdoalocError):
    """A scenario file could not be parsed."""


class NoFeasibleSolutionError(FdoalocError):
    """RANSAC finished without a single feasible candidate.

    Carries the per-iteration trace so callers can inspect what happened.
    """

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = tuple(trace)
