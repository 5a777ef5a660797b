"""Exception types shared across the package."""


class SurrhetError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(SurrhetError):
    """A required column is missing or the column mapping is malformed."""


class CsvParseError(SurrhetError):
    """A cell could not be parsed; carries the offending row and column."""

    def __init__(self, message, row=None, column=None):
        super().__init__(message)
        self.row = row
        self.column = column


class DomainError(SurrhetError):
    """A value is outside its allowed domain (e.g. group not in {0, 1})."""


class DataValidationError(SurrhetError):
    """Dataset-level validation failed (e.g. an empty treatment arm)."""


class InsufficientDataError(SurrhetError):
    """Too few rows to fit the requested model; names the component."""

    def __init__(self, message, component=None):
        super().__init__(message)
        self.component = component


class FitError(SurrhetError):
    """Numerical failure while fitting (e.g. singular penalized system)."""
