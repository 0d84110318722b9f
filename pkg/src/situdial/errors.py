"""Exception hierarchy shared across the package."""


class SitudialError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(SitudialError):
    """A value violates a domain invariant; the message names the field."""


class DatasetParseError(SitudialError):
    """A dataset record could not be parsed."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class StateError(SitudialError):
    """An operation was applied to a state that cannot accept it."""


class ProtocolError(StateError):
    """Two consecutive utterances would share a role."""


class BackendError(SitudialError):
    """A chat backend failed to produce a completion."""


class FixtureError(BackendError):
    """A scripted fixture had no entry for the request."""


class LabelParseError(SitudialError):
    """A classifier completion did not map to any allowed label."""


class GenerationError(SitudialError):
    """Dialogue generation produced no parseable output."""


class SamplingError(SitudialError):
    """A dataset builder could not satisfy its sampling constraints."""
