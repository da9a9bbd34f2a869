from __future__ import annotations


class LanegenError(Exception):
    """Base for every error raised by lanegen."""


class InputValidationError(LanegenError, ValueError):
    """Shapes, sizes or class ids that violate an operation's precondition."""


class PaletteFormatError(LanegenError, ValueError):
    def __init__(self, message: str, *, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ConfigurationError(LanegenError, ValueError):
    pass


class DatasetError(LanegenError):
    """Missing pair members, unreadable images, unwritable destinations."""


class CheckpointError(LanegenError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class TrainingDivergedError(LanegenError):
    def __init__(self, term: str, value: float, step: int) -> None:
        self.term = term
        self.value = value
        self.step = step
        super().__init__(f"non-finite {term}={value!r} at step {step}")


# Errors the CLI reports as usage/validation failures (exit code 2).
USAGE_ERRORS: tuple[type[LanegenError], ...] = (
    InputValidationError,
    PaletteFormatError,
    ConfigurationError,
)
