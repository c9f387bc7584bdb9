"""Shared exception types.

Kept in one place so the service layer can map them onto HTTP status
codes without importing every domain module.
"""

from __future__ import annotations


class CpgqaError(Exception):
    """Base class for all package-specific errors."""


class ParseError(CpgqaError):
    """Raised when a source document is empty or unreadable."""


class StructuralError(CpgqaError):
    """Raised when a selector is malformed or matches nothing required.

    Carries the offending selector so callers can repair the config.
    """

    def __init__(self, selector: str, reason: str):
        super().__init__(f"selector {selector!r}: {reason}")
        self.selector = selector
        self.reason = reason


class LoadError(CpgqaError):
    """Raised on malformed knowledge or patient input files.

    Points at the file and 1-based line (when line-oriented) that failed.
    """

    def __init__(self, path: str, reason: str, line: int | None = None):
        at = f"{path}:{line}" if line is not None else path
        super().__init__(f"{at}: {reason}")
        self.path = path
        self.line = line
        self.reason = reason


class ContractError(CpgqaError):
    """Raised when a caller violates a documented precondition."""


class TransportError(CpgqaError):
    """Raised when a remote scorer cannot be reached or misbehaves."""

    def __init__(self, endpoint: str, reason: str):
        super().__init__(f"scorer at {endpoint}: {reason}")
        self.endpoint = endpoint
        self.reason = reason
