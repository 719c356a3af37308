"""Error exponents for distributed hypothesis testing over noisy channels."""

from .errors import (
    ConfigurationError,
    DhtError,
    DimensionError,
    DomainError,
    GuardError,
    PreconditionError,
    StructureError,
    UnsupportedConfigurationError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigurationError", "DhtError", "DimensionError", "DomainError", "GuardError",
    "PreconditionError", "StructureError", "UnsupportedConfigurationError", "ValidationError",
]
