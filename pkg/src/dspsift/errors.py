"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class DspSiftError(Exception):
    """Base class for all package errors."""


class ConfigError(DspSiftError):
    """Invalid configuration value or file (CLI exit code 2)."""


class DataError(DspSiftError):
    """Malformed or missing input data (CLI exit code 3)."""
