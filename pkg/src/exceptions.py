"""Errors raised across the package.

Each error subclasses the builtin that a caller would otherwise expect, so
``except ValueError`` keeps working for code that does not care about the
finer distinction.
"""


class PreconditionError(ValueError):
    """An operation was called with arguments that violate its precondition."""


class GameSizeError(ValueError):
    """Exact enumeration was requested for a game above the configured cap."""


class ShapeError(ValueError):
    """Array dimensions or parameter lengths do not match."""


class LifecycleError(RuntimeError):
    """An object was used out of order (step after done, backward before forward)."""


class CheckpointError(ValueError):
    """A checkpoint could not be read or has an incompatible format version."""


class ConfigError(ValueError):
    """A run configuration is invalid.

    Attributes:
        field (str): dotted name of the offending setting, e.g. ``trainer.gamma``.
    """

    def __init__(self, field: str, message: str) -> None:
        super().__init__(f"{field}: {message}")
        self.field = field
