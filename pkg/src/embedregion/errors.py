"""Exception hierarchy shared by every module of the package."""


class EmbedRegionError(Exception):
    """Base class for all package errors."""


class ValidationError(EmbedRegionError, ValueError):
    """Input failed validation; ``field`` names the offending item when known."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class ShapeMismatch(ValidationError):
    pass


class NegativeMass(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class UnknownAxis(ValidationError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class OverlappingGroups(ValidationError):
    pass


class EmptyInput(ValidationError):
    pass


class StepNotDivisor(ValidationError):
    pass


class NotIndependent(ValidationError):
    pass


class BudgetZero(ValidationError):
    pass


class InfeasibleStart(ValidationError):
    pass


class ExhaustiveTooLarge(EmbedRegionError):
    pass


class LengthMismatch(ValidationError):
    pass


class TypicalSetEmptyOrRare(EmbedRegionError):
    pass


class CapExceeded(EmbedRegionError):
    pass


class UndefinedRow(EmbedRegionError):
    pass


class DecodingError(EmbedRegionError):
    pass


class NoneTypical(DecodingError):
    pass


class Ambiguous(DecodingError):
    pass


class ParseError(ValidationError):
    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line
