"""
Exception types shared by the library and the command line.

Library code raises these; only the CLI turns them into exit codes.
"""

from typing import Optional


class CgebdError(Exception):
    """Base error for the pipeline."""

    exit_code = 1


class ConfigError(CgebdError):
    """Invalid or inconsistent configuration."""

    exit_code = 2


class DataError(CgebdError):
    """Missing, malformed or inconsistent input data."""

    exit_code = 3


class ContainerError(DataError):
    """Malformed container or debug dump, optionally with the failing byte offset."""

    def __init__(self, message: str, offset: Optional[int] = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)


class AnnotationError(DataError):
    """Annotation or prediction files that do not line up."""


class NumericError(CgebdError):
    """Non-finite values in losses or gradients."""

    exit_code = 4


class ShapeError(ValueError):
    """Array shapes that violate a layer or codec contract."""
