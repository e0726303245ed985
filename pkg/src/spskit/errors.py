"""Exception types shared across the toolkit."""


class SpsError(Exception):
    """Base class for all toolkit errors."""


class TreeSyntaxError(SpsError):
    """Malformed bracketed tree text (unbalanced brackets, empty node, ...)."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class LabelError(SpsError):
    """A label is missing from the inventory, or the inventory is inconsistent."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class RootPromotionError(SpsError):
    """Normalization would delete a multi-child root node."""


class UnmappedNodeError(SpsError):
    """Strict-mode conversion hit a node no mapping rule covers."""


class MappingTableError(SpsError):
    """A mapping table violates its invariants (duplicate priorities, bad labels)."""


class EmptyFeaturesError(SpsError):
    """A candidate produced no features under the requested featurization mode."""


class TokenMismatchError(SpsError):
    """Predicted and gold trees disagree on the leaf token sequence."""


class GenerationError(SpsError):
    """Sentence generation failed (empty or garbled backend reply)."""

    def __init__(self, message, attempts=1, retriable=False):
        super().__init__(message)
        self.attempts = attempts
        self.retriable = retriable


class ModelFormatError(SpsError):
    """A persisted parser model fails validation on load."""


class ConfigError(SpsError):
    """A run or criterion configuration violates its invariants."""
