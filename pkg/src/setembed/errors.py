"""Exception hierarchy shared by all setembed modules."""


class SetEmbedError(Exception):
    """Base class for all errors raised by this package."""


class InvalidArgumentError(SetEmbedError, ValueError):
    """An argument violates a documented precondition."""


class ShapeError(SetEmbedError, ValueError):
    """Array shapes are inconsistent with each other or with the model."""


class ContractError(SetEmbedError, RuntimeError):
    """An internal contract was violated (stale cache, missing centroid, ...)."""


class DatasetParseError(SetEmbedError, ValueError):
    """A dataset file could not be parsed; carries the offending line number."""

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class InfeasibleError(SetEmbedError, ValueError):
    """The request cannot be satisfied by any output (e.g. no positive pair exists)."""


class DegenerateInputError(SetEmbedError, ValueError):
    """Numerically degenerate input (near-zero vector, empty list, ...)."""


class NumericAbortError(SetEmbedError, ArithmeticError):
    """Training hit a non-finite loss or gradient and was aborted."""

    def __init__(self, term, iteration):
        super().__init__(f"non-finite value in term '{term}' at iteration {iteration}")
        self.term = term
        self.iteration = iteration


class CheckpointFormatError(SetEmbedError, ValueError):
    """Checkpoint file does not start with the expected magic bytes / header."""


class CheckpointVersionError(SetEmbedError, ValueError):
    """Checkpoint file uses an unsupported format version."""


class CheckpointTruncatedError(SetEmbedError, ValueError):
    """Checkpoint file ends before all declared arrays are present."""


class ConfigError(SetEmbedError, ValueError):
    """Run configuration is invalid (unknown key, bad value, ...)."""
