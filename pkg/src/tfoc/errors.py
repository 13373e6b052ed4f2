"""Exception taxonomy shared across the toolkit.

The CLI maps these onto its exit-code contract: usage problems exit 1,
data/validation problems exit 2, anything else exits 3.
"""


class TfocError(Exception):
    """Base class for all toolkit errors."""


class UsageError(TfocError):
    """Bad command line, missing config file, or an invalid configuration."""


class DataError(TfocError):
    """Dataset or checkpoint content is missing, malformed, or inconsistent."""
