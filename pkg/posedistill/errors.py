"""
Exception families shared across the package.

Each family carries the process exit code the CLI reports for it, so that
scripts can branch on failures without parsing messages:

    0 success · 2 config · 3 dataset I/O · 4 checkpoint compatibility · 5 numerical
"""

from __future__ import annotations


class PosedistillError(Exception):
    """Base class for all errors raised deliberately by posedistill."""

    exit_code: int = 1


class ConfigError(PosedistillError, ValueError):
    """Unknown key, wrong value type, or unreadable run configuration."""

    exit_code = 2


class DatasetIOError(PosedistillError, OSError):
    """A dataset directory or one of its files is missing or unreadable."""

    exit_code = 3


class DatasetFormatError(PosedistillError, ValueError):
    """A dataset file exists but its header, length, or checksum is wrong."""

    exit_code = 3


class CheckpointError(PosedistillError, ValueError):
    """A checkpoint is malformed or incompatible with the data or strategy."""

    exit_code = 4


class NumericalError(PosedistillError, ArithmeticError):
    """A forward value or loss became NaN or infinite."""

    exit_code = 5
