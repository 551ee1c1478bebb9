"""Exception types shared across the package."""


class CoulombLabError(Exception):
    """Base class for all package errors."""


class ConfigError(CoulombLabError):
    """Invalid user input: bad potential parameters, malformed run config."""


class UnsupportedError(CoulombLabError):
    """Operation not available for the given inputs (e.g. no analytic droplet)."""


class ModelViolationError(CoulombLabError):
    """A mathematical precondition failed at runtime (e.g. negative density)."""


class NumericalError(CoulombLabError):
    """Quadrature, conditioning, or convergence failure."""
