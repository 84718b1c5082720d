"""Exception and warning types raised across the package."""


class OTFPCAError(Exception):
    """Base class for all package errors."""


class InvalidInputError(OTFPCAError, ValueError):
    """Malformed or empty input data."""


class DomainError(OTFPCAError, ValueError):
    """A value lies outside the unit interval where measures live."""


class IncompatibleGridError(OTFPCAError, ValueError):
    """Two grid objects do not share the same grid size."""


class InvalidParameterError(OTFPCAError, ValueError):
    """A tuning parameter is outside its admissible range."""


class ConfigurationError(OTFPCAError, ValueError):
    """A required configuration entry is missing or inconsistent."""


class ParseError(OTFPCAError, ValueError):
    """A CSV or config file could not be parsed. Carries the offending row."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class NumericalError(OTFPCAError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class InsufficientDataError(NumericalError):
    """Too few support points inside a smoothing window."""

    def __init__(self, message, window=None):
        super().__init__(message)
        self.window = window


class DegenerateWindowError(NumericalError):
    """Local-linear weights are undefined because the window variance vanishes."""


class NotEstimableError(NumericalError):
    """A covariance grid point stayed unidentified after widening the window."""


class DegenerateBaselineError(NumericalError):
    """A baseline transport is the identity and cannot be rescaled."""


class ConditioningError(NumericalError):
    """A covariance matrix is singular even after ridge regularisation."""


class StudyError(NumericalError):
    """Too many Monte Carlo replications failed."""


class DegenerateSourceWarning(UserWarning):
    """Source measure has a flat quantile plateau; a generalized inverse is used."""


class FeasibilityWarning(UserWarning):
    """A requested baseline scale was reduced to keep the map monotone."""
