"""Exception types shared across the package.

The CLI maps these onto stable exit codes: ConfigError -> 2, data/format/shape
problems -> 3, NonFiniteError -> 4.
"""


class ScpError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(ScpError):
    """Invalid configuration value or flag combination."""


class ShapeError(ScpError):
    """Array shape, width, or length mismatch."""


class DataError(ScpError):
    """Invalid data content (non-finite values, out-of-range labels, ...)."""


class FormatError(DataError):
    """Malformed binary file: bad magic, bad version, or truncation."""


class AlignmentError(DataError):
    """Two datasets that must be item-aligned are not."""


class CacheError(ScpError):
    """Forward cache does not match the head or the upstream gradient."""


class NonFiniteError(ScpError):
    """Non-finite loss or gradient encountered; training aborts loudly."""


class UndefinedMetricError(ScpError):
    """Metric undefined for the given input (e.g. ARI needs n >= 2)."""
