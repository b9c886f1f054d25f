"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage/config problems exit 1, data
problems exit 2, numeric failures exit 3.
"""


class MorphEmbedError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MorphEmbedError):
    """Invalid configuration or command usage."""


class DataError(MorphEmbedError):
    """Structurally invalid or missing input data."""


class SwcParseError(DataError):
    """Malformed SWC content; message carries the offending line number."""


class NumericError(MorphEmbedError):
    """Numerical failure: non-convergence or non-finite intermediate values."""
