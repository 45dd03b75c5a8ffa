"""Exception types shared across the toolkit.

Every exception carries a stable ``code`` string so CLI output and JSONL
records can name the failure class without depending on Python class names.
"""


class SrtError(Exception):
    code = "SRT_ERROR"


class PreconditionViolated(SrtError):
    code = "PRECONDITION_VIOLATED"


class MalformedAnnotation(SrtError):
    code = "MALFORMED_ANNOTATION"


class GoldOutOfRange(SrtError):
    code = "GOLD_OUT_OF_RANGE"


class EmptyRationale(SrtError):
    code = "EMPTY_RATIONALE"


class LengthMismatch(SrtError):
    code = "LENGTH_MISMATCH"


class RemoteUnavailable(SrtError):
    code = "REMOTE_UNAVAILABLE"


class TransportError(SrtError):
    code = "TRANSPORT_ERROR"


class NotABadCase(SrtError):
    code = "NOT_A_BAD_CASE"


class ConfigError(SrtError):
    """Bad run configuration (unknown keys, out-of-range values). A usage error."""

    code = "CONFIG_ERROR"
