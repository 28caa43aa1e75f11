"""
Shared exception classes.
"""

from typing import Optional, Sequence


class DvcSelectError(Exception):
    """Base exception for all dvcselect errors."""

    error_class = "dvcselect_error"


class DomainError(DvcSelectError):
    """Base exception for domain-related errors."""

    error_class = "domain_error"


class ApplicationError(DvcSelectError):
    """Base exception for application-related errors."""

    error_class = "application_error"


class InfrastructureError(DvcSelectError):
    """Base exception for infrastructure-related errors."""

    error_class = "infrastructure_error"


# Domain exceptions
class ValidationError(DomainError):
    """Raised when domain validation fails."""

    error_class = "validation_error"


class ShapeError(ValidationError):
    """Raised when a vector or matrix has the wrong dimension."""

    error_class = "shape_error"


class InputError(ValidationError):
    """Raised when an input contains non-finite values or an invalid target."""

    error_class = "input_error"


class StalenessError(DomainError):
    """Raised when a trace is used against a different model version."""

    error_class = "staleness_error"


class NumericsError(DomainError):
    """Raised when a numerical procedure cannot produce a finite result."""

    error_class = "numerics_error"


class UnsupportedLossError(DomainError):
    """Raised when an operation is undefined for the model's loss kind."""

    error_class = "unsupported_loss"


class UnsupportedOperationError(DomainError):
    """Raised when an operation is requested outside the mode that supports it."""

    error_class = "unsupported_operation"


class ColdStartError(DomainError):
    """Raised when a statistic is requested before any observation exists."""

    error_class = "cold_start"


class DuplicateIdError(DomainError):
    """Raised when an id is inserted twice into an index."""

    error_class = "duplicate_id"


class DegenerateVectorError(DomainError):
    """Raised when a zero-norm vector is used where a direction is required."""

    error_class = "degenerate_vector"


# Infrastructure exceptions
class ConfigurationError(InfrastructureError):
    """Raised when there's a configuration-related error."""

    error_class = "configuration_error"


class SchemaError(InfrastructureError):
    """Raised when a dataset file does not match the expected schema."""

    error_class = "schema_error"

    def __init__(
        self,
        message: str,
        line_numbers: Optional[Sequence[int]] = None,
        column: Optional[str] = None,
    ):
        self.line_numbers = list(line_numbers or [])
        self.column = column
        super().__init__(message)


class StorageError(InfrastructureError):
    """Raised when storage operations fail."""

    error_class = "storage_error"


# Application exceptions
class ExperimentError(ApplicationError):
    """Raised when an experiment cell cannot be completed."""

    error_class = "experiment_error"
