"""Exception types shared across the package.

Every error carries an ``exit_code`` used by the CLI: 1 for usage and
configuration problems, 2 for data or numeric failures.
"""

from __future__ import annotations


class RunPredictError(Exception):
    """Base class for all package errors."""

    exit_code = 2


class ConfigError(RunPredictError):
    """Invalid configuration, scenario file, or command usage."""

    exit_code = 1


class EmptyRunError(RunPredictError):
    """A run with no samples where at least one is required."""


class MalformedRunError(RunPredictError):
    """Run data violating the telemetry invariants (ordering, ranges)."""


class MalformedProfileError(RunPredictError):
    """Mission profile violating its invariants."""


class DegenerateCorpusError(RunPredictError):
    """A corpus that cannot be normalized (empty, or zero max speed)."""


class ShapeError(RunPredictError):
    """Array dimensions inconsistent with the model or operation."""


class NumericError(RunPredictError):
    """Non-finite values where finite numbers are required."""


class NumericFailureError(NumericError):
    """Optimizer hit a non-finite error value; carries the last good state."""

    def __init__(self, message: str, params=None, trace=None):
        super().__init__(message)
        self.params = params
        self.trace = trace


class DivergenceError(NumericError):
    """Training error grew past the divergence guard."""


class MisalignedSeriesError(RunPredictError):
    """Two series that must share length and timestamps do not."""


class ModelFormatError(RunPredictError):
    """Model file malformed (truncated, bad magic, bad layout)."""


class UnsupportedVersionError(ModelFormatError):
    """Model file written by an unsupported format version."""


class ChecksumError(ModelFormatError):
    """Model file checksum mismatch."""


class OutOfRangeWarning(UserWarning):
    """Profile commands exceed the speed range seen in training."""
