"""Exception types shared across the package."""


class NumericalFailure(RuntimeError):
    """An iteration failed to converge or a sweep produced non-finite values."""


class ResourceLimit(RuntimeError):
    """A request would exceed a hard enumeration or memory budget."""


class ConfigError(ValueError):
    """A config file is missing, malformed, or inconsistent."""
