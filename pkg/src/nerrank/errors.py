"""Exception hierarchy shared across the toolkit.

The CLI maps each class to a distinct exit code (see cli.EXIT_CODES).
"""


class NerrankError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(NerrankError):
    """Malformed, unknown, or type-invalid configuration key/value."""


class ParseError(NerrankError):
    """Malformed input data (CoNLL, n-best, embedding, or cluster files)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CheckpointMismatchError(NerrankError):
    """Checkpoint contents disagree with the active configuration."""


class ShapeMismatchError(NerrankError):
    """Tensor operands have incompatible shapes."""
