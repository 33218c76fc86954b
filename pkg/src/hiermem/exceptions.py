"""Exception hierarchy.

Everything raised on purpose by the package derives from :class:`HMemError`,
so callers (the CLI in particular) can map failures to exit codes.
"""
from __future__ import annotations


class HMemError(Exception):
    """Base class for all package errors."""


class ConfigError(HMemError, ValueError):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"invalid config field {field!r}: {message}")


class ValidationError(HMemError, ValueError):
    """Input failed a contract check; nothing was mutated."""


class DimensionError(ValidationError):
    pass


class NormError(ValidationError):
    pass


class DegenerateInputError(ValidationError):
    pass


class NotFoundError(HMemError, LookupError):
    def __str__(self) -> str:  # LookupError would quote the message
        return str(self.args[0]) if self.args else "not found"


class UnsupportedOperationError(HMemError):
    pass


class IntegrityError(HMemError):
    def __init__(self, violations):
        self.violations = list(violations)
        lines = "\n".join(f"  - {v}" for v in self.violations[:20])
        more = len(self.violations) - 20
        if more > 0:
            lines += f"\n  ... and {more} more"
        super().__init__(f"store failed integrity check ({len(self.violations)} violations):\n{lines}")


class SnapshotError(HMemError):
    pass


class VersionMismatchError(SnapshotError):
    def __init__(self, found, supported):
        self.found = found
        self.supported = supported
        super().__init__(f"snapshot format version {found} is not supported (this build reads version {supported})")


class ChecksumError(SnapshotError):
    pass


class TruncatedSnapshotError(SnapshotError):
    pass


class CorpusError(HMemError):
    pass


class ExtractionError(HMemError):
    def __init__(self, message: str, raw: str | None = None):
        self.raw = raw
        super().__init__(message)


class TransportError(HMemError):
    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(message)


class MalformedResponseError(TransportError):
    pass
