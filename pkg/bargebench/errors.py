"""Exception hierarchy shared by every bargebench module.

Library code raises; only the CLI maps exceptions to exit codes:

- ConfigError  -> 2 (bad input, failed precondition)
- StorageError -> 3 (missing/unwritable files)
- NumericError -> 4 (non-finite loss, gradient or signal)
"""
from __future__ import annotations

from typing import Any, Dict, Optional


class BargeBenchError(Exception):
    """Base error. ``name`` is the offending field, parameter or file."""

    exit_code = 1

    def __init__(self, name: str, message: str, details: Optional[Dict[str, Any]] = None):
        self.name = name
        self.message = message
        self.details = details or {}
        super().__init__(f"{name}: {message}")


class ConfigError(BargeBenchError):
    """Invalid configuration or violated precondition."""

    exit_code = 2


class FormatError(ConfigError):
    """WAV payload outside the supported PCM16 mono RIFF format."""


class ShapeError(ConfigError):
    """Tensor shapes are incompatible for an operation."""


class GeometryError(ConfigError):
    """Room geometry cannot be realized (coincident points, no valid placement)."""


class InfeasibleRoomError(ConfigError):
    """Sabine absorption came out at or above 1."""


class DegenerateSignalError(ConfigError):
    """A signal that must carry energy is silent."""


class NotApplicableError(ConfigError):
    """Metric undefined for the input, e.g. only one class present."""


class EmptyInputError(ConfigError):
    """An input that must be non-empty is empty."""


class StorageError(BargeBenchError):
    """File system failure: missing input, unwritable output, escaping paths."""

    exit_code = 3


class NumericError(BargeBenchError):
    """Non-finite values in a numerical computation."""

    exit_code = 4
