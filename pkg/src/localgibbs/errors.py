"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class ResourceCapError(RuntimeError):
    """A hard resource cap was exceeded, e.g. the dense eigensolver dimension
    limit (CLI exit code 3)."""


class ConvergenceError(RuntimeError):
    """An iterative routine exhausted its budget without reaching its target."""
