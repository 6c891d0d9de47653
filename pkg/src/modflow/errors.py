"""Exception types shared across the package."""


class ModflowError(Exception):
    """Base class for package errors."""


class ConfigurationError(ModflowError, ValueError):
    """Inputs are mutually inconsistent or malformed."""


class DomainError(ModflowError, ValueError):
    """An argument lies outside the domain of a formula (e.g. t >= 1)."""


class ValidationError(ModflowError, ValueError):
    """A matrix or spec fails a structural check."""


class DegenerateScalingError(ValidationError):
    """A projection row is nonzero but sums to zero, so it cannot be rescaled."""


class NumericalDegeneracyError(ModflowError, ArithmeticError):
    """Posterior weights are not representable (non-finite log-weights)."""


class PositivityError(ModflowError, ValueError):
    """A probability weight that must be strictly positive is zero."""
