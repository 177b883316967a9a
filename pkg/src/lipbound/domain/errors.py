"""
Exception hierarchy.

Every error carries the process exit code the CLI reports for it.
"""


class LipboundError(Exception):
    """Base class for all lipbound errors."""

    exit_code: int = 1


class ConfigurationError(LipboundError):
    """Raised for invalid run configuration or usage."""

    exit_code = 2


class UnsupportedConfigurationError(ConfigurationError):
    """Raised when a method cannot handle the given layer configuration."""
    pass


class DomainError(ConfigurationError):
    """Raised when an argument lies outside an operation's domain."""
    pass


class DataFormatError(LipboundError):
    """Raised for malformed data, model files or inputs."""

    exit_code = 3


class ShapeError(DataFormatError):
    """Raised when tensor or layer shapes do not compose."""
    pass


class InvalidInputError(DataFormatError):
    """Raised when numeric input contains non-finite values."""
    pass


class SizeLimitError(DataFormatError):
    """Raised when a matrix exceeds the exact-SVD size cap."""
    pass


class NumericalFailureError(LipboundError):
    """Raised for non-convergence or equivalence breaches."""

    exit_code = 4
