"""Exception hierarchy shared across the package.

CLI exit-code mapping: DataError -> 2, NumericError -> 3, anything else
unexpected -> nonzero with a traceback.
"""


class HegError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(HegError, ValueError):
    """Shape mismatch between matrices or graph components."""


class DataError(HegError):
    """Problems with input data: files, formats, annotations."""


class IngestionError(DataError):
    """Malformed or incomplete annotation / feature input."""


class FormatError(DataError):
    """Corrupt or mismatched binary file (bad magic, version, truncation)."""


class NumericError(HegError):
    """Non-finite values where finite ones are required (divergence, bad f)."""
