"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: validation-type failures exit 1,
file/format failures exit 2.
"""


class RefineryError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(RefineryError):
    """Tensor dimensions do not satisfy an operation's contract."""


class GraphError(RefineryError):
    """Autodiff graph misuse (non-scalar loss, consumed tape, dtype mix)."""


class ConfigError(RefineryError):
    """Invalid configuration value or combination."""


class InputError(RefineryError):
    """Runtime data violates a precondition (range, dimension, availability)."""


class FormatError(RefineryError):
    """A binary file does not match its declared layout.

    Carries the byte offset at which parsing failed when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TrainingAborted(RefineryError):
    """Optimization stopped because the loss became non-finite."""

    def __init__(self, message, step):
        super().__init__(f"{message} (at step {step})")
        self.step = step
