class ESGDError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(ESGDError, ValueError):
    pass


class ConsistencyError(ESGDError):
    """An internal cross-check between two independent computations failed."""


class DivergenceError(ESGDError):
    """Raised when an iteration blows up (non-finite iterate or runaway gap)."""

    def __init__(self, message: str, stage: int | None = None, iteration: int | None = None):
        super().__init__(message)
        self.stage = stage
        self.iteration = iteration


class UnsupportedProblemError(ESGDError):
    pass


class EstimationError(ESGDError):
    pass


class AnalysisError(ESGDError):
    pass
