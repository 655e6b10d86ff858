"""Exception hierarchy shared by every module."""


class SpinCorrError(Exception):
    """Base class for all package errors."""


class ValidationError(SpinCorrError, ValueError):
    """An argument violates a documented precondition."""


class InsufficientDataError(SpinCorrError, ValueError):
    """Too few events to form the requested estimate."""


class ConfigurationError(SpinCorrError, ValueError):
    """Inputs are individually valid but inconsistent with each other."""


class DataError(SpinCorrError, ValueError):
    """An event file or event stream is malformed or violates invariants."""


class EvaluationError(SpinCorrError, ArithmeticError):
    """A user-supplied function returned a non-finite value."""
