"""Exception types shared across the package."""


class AbideError(Exception):
    """Base class for all errors raised by this package."""


class InvalidSizeError(AbideError):
    """Requested grid size cannot fit the object set."""


class ConfigError(AbideError):
    """A configuration value violates its documented bound."""


class EpisodeOverError(AbideError):
    """step() was called on an environment that already finished."""


class PlacementError(AbideError):
    """No eligible cell exists for object placement."""


class TraceParseError(AbideError):
    """A trace file is malformed.

    Carries the 1-based line number at which parsing failed.
    """

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class TraceVersionError(AbideError):
    """A trace file declares an unsupported schema version."""
