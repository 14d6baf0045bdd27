"""Error types shared across the package.

The split mirrors the CLI exit codes: data problems exit 2, config
problems exit 3, anything else is an internal error and exits 4.
"""


class FairauditError(Exception):
    """Base class for errors raised by this package."""


class DataError(FairauditError):
    """The input data is missing, malformed, or insufficient for the request."""


class ConfigError(FairauditError):
    """A configuration file or parameter set is invalid."""
