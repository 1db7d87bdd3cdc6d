"""Exception hierarchy shared across the pipeline."""


class TubekitError(Exception):
    """Base class for all pipeline errors."""


class InvalidInputError(TubekitError):
    """Raised when a value violates a documented precondition."""


class ParseError(TubekitError):
    """Raised on malformed file input; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}: "
        super().__init__(f"{where}{message}")


class SchemaError(TubekitError):
    """Raised when a record is well-formed but violates a schema constraint."""


class ConsistencyError(TubekitError):
    """Raised when cross-file references do not line up (e.g. unknown video_id)."""


class ScoringError(TubekitError):
    """Raised when a scorer fails on a proposal; carries the proposal id."""

    def __init__(self, message, proposal_id=None):
        self.proposal_id = proposal_id
        if proposal_id is not None:
            message = f"proposal {proposal_id}: {message}"
        super().__init__(message)
