"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to.
"""
from __future__ import annotations


class SefragError(Exception):
    exit_code = 1


class StructuralError(SefragError, ValueError):
    """Malformed input: wrong sizes, bad lengths, unknown tags."""

    exit_code = 2


class CoefficientRangeError(SefragError, ValueError):
    """A coefficient does not fit its storage field."""

    exit_code = 4

    def __init__(self, message: str, position: tuple[int, ...] | None = None, value: int | None = None):
        super().__init__(message)
        self.position = position
        self.value = value


class AvailabilityError(SefragError):
    """One or more fragment streams are missing or unreachable."""

    exit_code = 3

    def __init__(self, message: str, missing: tuple[str, ...] = (), retryable: bool = False):
        super().__init__(message)
        self.missing = missing
        self.retryable = retryable


class IntegrityError(SefragError):
    """Stored bytes do not match their recorded digest."""

    exit_code = 4

    def __init__(self, message: str, stream: str | None = None):
        super().__init__(message)
        self.stream = stream


class PolicyError(SefragError):
    """Placement would put the private fragment on an untrusted target."""

    exit_code = 5


class NonceReuseError(SefragError):
    exit_code = 5


class UndefinedCorrelationError(SefragError, ValueError):
    """Correlation requested on a zero-variance sequence."""

    exit_code = 2


class StorageIOError(SefragError, OSError):
    """Reading or writing an input, output, or storage target failed."""

    exit_code = 3

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset
