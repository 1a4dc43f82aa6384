"""Exception types shared across the engine."""


class NextEditError(Exception):
    """Base class for all engine errors."""


class ContentMismatch(NextEditError):
    """An edit's pre-code does not match the project content at its span."""


class FileMissing(NextEditError):
    """An edit or query names a file the project does not contain."""


class EmptySpan(NextEditError):
    """A line span with start > end where a nonempty span is required."""


class MalformedDiff(NextEditError):
    """Unified diff text could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line_no: int):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class InconsistentMapping(NextEditError):
    """A token-to-line mapping violated ordering or coverage constraints."""


class MalformedEncoding(NextEditError):
    """Enriched-representation text does not parse back to a labelled hunk."""


class EmptyCorpus(NextEditError):
    """A corpus statistic was requested over zero hunks."""


class RepoUnreadable(NextEditError):
    """The given path is not a readable git checkout."""


class CheckoutFailed(NextEditError):
    """A commit's tree could not be materialized."""


class ReplayDesync(NextEditError):
    """A gold hunk no longer applies during replay; line renumbering went wrong."""


class BackendUnavailable(NextEditError):
    """The requested prediction backend is not configured."""


class LengthMismatch(NextEditError):
    """Predicted and gold label sequences differ in length."""


class NoComposition(NextEditError):
    """A tool service was asked to act where no composition applies."""


class LaunchFailed(NextEditError):
    """A language server process could not be started."""


class HandshakeTimeout(NextEditError):
    """The language server did not answer the initialize request in time."""


class ServerError(NextEditError):
    """The language server returned a JSON-RPC error."""

    def __init__(self, code: int, message: str):
        super().__init__(f"server error {code}: {message}")
        self.code = code


class RequestTimeout(NextEditError):
    """A language server request did not complete within the configured window."""


class TransportClosed(NextEditError):
    """The language server connection died while a request was pending."""
