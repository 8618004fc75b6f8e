"""Shared error and diagnostic types."""

from dataclasses import dataclass


class ValidationError(Exception):
    """Bad input data or configuration. The CLI maps this to exit code 1."""


@dataclass(frozen=True)
class Diagnostic:
    """One rejected input line: where it was and why."""

    line: int
    message: str

    def __str__(self):
        return f"line {self.line}: {self.message}"
