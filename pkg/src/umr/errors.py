"""Exception and warning types shared across the package."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional


class UMRError(Exception):
    """Base class for all errors raised by this package."""


class VersionError(UMRError, ValueError):
    def __init__(self, message: str, text: Optional[str] = None, span: Optional[tuple[int, int]] = None):
        if span is not None:
            message = f"{message} (at {span[0]}..{span[1]})"
        super().__init__(message)
        self.text = text
        self.span = span


class ManifestSyntaxError(UMRError):
    """Malformed manifest text; ``line``/``column`` are 1-based when known."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        where = f"line {line}, column {column}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
        self.column = column


@dataclass(frozen=True)
class Violation:
    severity: str  # "error" | "warning"
    path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.path}: {self.message}"


class RecordError(UMRError):
    """A record failed schema or invariant checks."""

    def __init__(self, violations: list[Violation]):
        self.violations = list(violations)
        lines = "; ".join(str(v) for v in self.violations if v.severity == "error")
        super().__init__(lines or "invalid record")


class ResolutionError(UMRError):
    pass


class CycleError(ResolutionError):
    def __init__(self, cycle: list):
        self.cycle = list(cycle)
        super().__init__("dependency cycle: " + " -> ".join(str(n) for n in self.cycle))


class MissingDependencyError(ResolutionError):
    def __init__(self, target, req, dependent=None):
        self.target = target
        self.req = req
        self.dependent = dependent
        origin = f" (required by {dependent})" if dependent is not None else ""
        super().__init__(f"cannot resolve {target} {req}{origin}")


class RegistryError(UMRError):
    pass


class NotFoundError(RegistryError):
    pass


class ImmutableVersionError(RegistryError):
    def __init__(self, rid, version):
        super().__init__(f"version immutable: {rid}@{version} is already published")


class IntegrityError(RegistryError):
    def __init__(self, what: str, expected: str, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(f"digest mismatch for {what}: expected {expected}, got {actual}")


class TransportError(RegistryError):
    def __init__(self, message: str, attempts: int = 1):
        self.attempts = attempts
        super().__init__(f"{message} (after {attempts} attempt{'s' if attempts != 1 else ''})")


class AdvisoryError(UMRError):
    pass


class UMRWarning(UserWarning):
    pass


class YankedWarning(UMRWarning):
    pass


class ShadowWarning(UMRWarning):
    pass
