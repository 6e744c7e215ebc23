"""Exception hierarchy shared by all modules and mapped to CLI exit codes."""


class BathycorrError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(BathycorrError):
    """Invalid configuration: bad key, out-of-range value, malformed scene."""


class InputError(BathycorrError):
    """Unreadable or malformed input data (files, rows, model payloads)."""


class NumericalError(BathycorrError):
    """Ill-posed numerical problem: degenerate design, undefined statistic."""
