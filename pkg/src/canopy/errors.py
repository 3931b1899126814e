"""Shared exception types with stable machine-readable codes."""

from __future__ import annotations


class CanopyError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"

    def __init__(self, message: str, **details):
        super().__init__(message)
        self.message = message
        self.details = details


class ValidationFailed(CanopyError):
    """One or more domain invariants were violated."""

    code = "validation-failed"

    def __init__(self, violations: list[str], message: str | None = None):
        self.violations = list(violations)
        super().__init__(message or "; ".join(self.violations))


class NotFound(CanopyError):
    code = "not-found"


class IllegalTransition(CanopyError):
    code = "illegal-transition"


class DemoModeDisabled(CanopyError):
    code = "demo-mode-disabled"
