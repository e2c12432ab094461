"""Exception types shared across the package."""


class FedNamError(Exception):
    """Base class for package errors."""


class ConfigError(FedNamError):
    """Invalid or inconsistent run configuration (CLI exit code 1)."""


class DataError(FedNamError):
    """Unreadable, malformed, or mismatched input data (CLI exit code 2)."""


class TrainingError(FedNamError):
    """Training diverged or a client failed (CLI exit code 3)."""


class ShapeMismatchError(FedNamError, ValueError):
    """Array dimensions do not line up."""


class StaleCacheError(FedNamError):
    """A backward pass was given a cache from an outdated forward pass."""
