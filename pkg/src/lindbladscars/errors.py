"""Exception types shared across the package."""


class SolverError(RuntimeError):
    """Raised when an eigensolver or integrator fails to reach its target."""


class ConfigError(ValueError):
    """Raised for invalid experiment configurations."""
