"""Exception hierarchy shared by the library and the command line."""


class DmpkitError(Exception):
    """Base class for all errors raised by dmpkit."""


class InputFileError(DmpkitError):
    """A trajectory, model or recording file could not be parsed."""


class ConfigError(DmpkitError, ValueError):
    """Invalid configuration value or unknown configuration key."""


class NumericError(DmpkitError, ArithmeticError):
    """A computation produced non-finite values or a singular system."""
