"""Exception hierarchy shared by every module."""


class QowfError(Exception):
    """Base class for all package errors."""


class InvalidSizeError(QowfError, ValueError):
    pass


class InvalidArgumentsError(QowfError, ValueError):
    pass


class CompatibilityError(QowfError, ValueError):
    """CNOT requested on a pair that would leave the GCH family."""


class UnsupportedGateError(QowfError, ValueError):
    pass


class ResourceLimitError(QowfError):
    pass


class ParseError(QowfError, ValueError):
    """Malformed serialized artifact. ``field`` names the offending entry."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class FormatError(QowfError, ValueError):
    """Structurally inconsistent description/image pair."""


class ConstructionError(QowfError, RuntimeError):
    """An OWF schedule invariant was violated while building. Always a bug."""


class LedgerError(QowfError):
    pass


class ProtocolAbort(QowfError):
    pass
