"""Exception hierarchy. Every error raised by the library derives from EbchanError."""


class EbchanError(ValueError):
    pass


class NotADensityMatrix(EbchanError):
    pass


class NotHermitian(NotADensityMatrix):
    pass


class BadSubsystemIndex(EbchanError):
    pass


class BadSubsystemCount(EbchanError):
    pass


class WeightMismatch(EbchanError):
    pass


class DimensionMismatch(EbchanError):
    pass


class BadParams(EbchanError):
    pass


class ValidationError(EbchanError):
    """Input failed a numerical validity check; ``residual`` holds the offending size."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class InvalidHolevoForm(ValidationError):
    pass


class ParseError(EbchanError):
    """Malformed channel or state file; ``context`` names the offending field."""

    def __init__(self, message, context=None):
        if context:
            message = f"{context}: {message}"
        super().__init__(message)
        self.context = context


class TraceInfeasible(EbchanError):
    pass
