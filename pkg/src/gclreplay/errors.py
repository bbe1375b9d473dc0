"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value or file is invalid (CLI exit code 2)."""


class DatasetFormatError(ValueError):
    """A dataset directory violates the on-disk format (CLI exit code 3)."""


class NumericalError(RuntimeError):
    """A non-finite value appeared during training (CLI exit code 4)."""
