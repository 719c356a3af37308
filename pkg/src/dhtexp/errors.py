"""Exception hierarchy shared by every module."""


class DhtError(Exception):
    """Base class for all package errors."""


class DimensionError(DhtError, ValueError):
    """Axis names or shapes do not line up."""


class DomainError(DhtError, ValueError):
    """A scalar argument is outside the domain of the function."""


class ValidationError(DhtError, ValueError):
    """Input data fails a probability or schema check."""


class PreconditionError(DhtError):
    """Inputs are valid but violate a scheme-specific precondition."""


class StructureError(PreconditionError):
    """The alternate hypothesis does not have the required factorization."""


class ConfigurationError(DhtError, ValueError):
    """A solver or simulator was asked to run outside its guard rails."""


class UnsupportedConfigurationError(PreconditionError):
    """The scheme is not defined for this configuration (e.g. a bandwidth ratio)."""


class GuardError(ConfigurationError):
    """A simulator guard tripped (for instance, too many lattice bins)."""
