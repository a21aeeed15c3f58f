"""Exception hierarchy shared by all estimator modules."""


class EstimationError(ValueError):
    """Base class for every error raised by this package."""


class IngestError(EstimationError):
    """The observations cannot form a consistent integrated sample."""


class DuplicateInSource(IngestError):
    pass


class ConflictingValue(IngestError):
    pass


class NonFiniteValue(IngestError):
    pass


class ParseError(IngestError):
    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptySample(EstimationError):
    pass


class InsufficientSample(EstimationError):
    pass


class InsufficientUnique(EstimationError):
    pass


class DivergentEstimate(EstimationError):
    """Every observed entity is a singleton; coverage-based estimates blow up."""


class ZeroCoverage(DivergentEstimate):
    pass


class SourceLargerThanPopulation(EstimationError):
    pass


class DimensionMismatch(EstimationError):
    pass


class InvalidDistribution(EstimationError):
    pass


class InvalidConfig(EstimationError):
    pass
