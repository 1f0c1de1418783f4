"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input failed a structural or range check."""


class StateError(RuntimeError):
    """Operation called in the wrong lifecycle state."""


class UnsupportedCapabilityError(RuntimeError):
    """Device does not advertise the requested capability."""


class GazeParseError(ValueError):
    """A gaze file row failed to parse.

    `row` is the 1-based data-row index (header excluded).
    """

    def __init__(self, row: int, message: str):
        super().__init__(f"row {row}: {message}")
        self.row = row


class GazeWriteError(IOError):
    """Writing a gaze recording failed; `samples_written` rows made it to disk."""

    def __init__(self, samples_written: int, message: str):
        super().__init__(f"{message} ({samples_written} samples written)")
        self.samples_written = samples_written
