"""Exception taxonomy shared across the toolkit.

The CLI maps these onto exit codes: missing input files exit 2 (plain
FileNotFoundError), schema/validation problems exit 3, quota shortfalls
exit 4.
"""

from __future__ import annotations


class ToolkitError(Exception):
    """Base class for all toolkit-specific errors."""


class SchemaError(ToolkitError):
    """A record, file, or config violates a documented invariant."""

    def __init__(self, message: str, *, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if field is not None:
            prefix += f"{field}: "
        super().__init__(prefix + message)


class RecordParseError(SchemaError):
    """Raised when a serialized record or answer string cannot be parsed."""

    def __init__(self, message: str, *, line: int | None = None, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message, line=line)


class RegistryError(ToolkitError):
    """Lookup of an unknown scenario category or preset."""


class QuotaShortfallError(ToolkitError):
    """A stratified sample could not be fully filled."""
