"""Exception hierarchy shared by the whole package."""


class IdmaError(Exception):
    """Base class for all package errors."""


class ValidationError(IdmaError, ValueError):
    """Input data violates a structural requirement."""


class DimensionMismatch(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class DegenerateExposure(ValidationError):
    pass


class RankDeficientCovariates(ValidationError):
    pass


class ZeroVariance(ValidationError):
    pass


class InvalidShape(ValidationError):
    pass


class RankTooLarge(ValidationError):
    pass


class NonPositiveLoss(ValidationError):
    pass


class TooShort(ValidationError):
    pass


class SchemaError(ValidationError):
    """An input file does not follow the documented layout."""


class SolverError(IdmaError, RuntimeError):
    pass


class ConvergenceFailure(SolverError):
    pass


class SolverDiverged(SolverError):
    pass


class SingularDesign(SolverError):
    pass


class StageError(IdmaError, RuntimeError):
    """Wraps a failure raised inside one stage of the estimation pipeline."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {cause}")
