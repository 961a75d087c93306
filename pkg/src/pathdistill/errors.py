"""Exception types shared across the package."""


class PathdistillError(Exception):
    """Base class for package-specific failures."""


class DataError(PathdistillError):
    """Raised when an input file or record is missing, malformed, or inconsistent."""


class ConfigError(PathdistillError):
    """Raised when a configuration value or override is invalid."""
