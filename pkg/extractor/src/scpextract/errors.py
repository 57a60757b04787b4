"""Error types with stable CLI exit codes (2 config, 3 data)."""


class ExtractError(Exception):
    """Base class for extraction failures."""

    exit_code = 3


class JobConfigError(ExtractError):
    """Bad job parameters or unknown backbone/dataset."""

    exit_code = 2


class WeightsUnavailableError(JobConfigError):
    """Backbone weights are not importable or not downloaded."""


class DatasetError(ExtractError):
    """Dataset missing, unreadable, or empty after skipping bad images."""
