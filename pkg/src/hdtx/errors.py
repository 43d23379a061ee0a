"""Exception hierarchy shared by every layer of the package."""

from __future__ import annotations


class HdtxError(Exception):
    """Base class for all errors raised by this package."""


class MalformedLine(HdtxError):
    def __init__(self, reason: str, position: int = 0, line_number: int | None = None):
        self.reason = reason
        self.position = position
        self.line_number = line_number
        super().__init__(reason)

    def __str__(self) -> str:
        where = f"line {self.line_number}, " if self.line_number is not None else ""
        return f"{where}column {self.position + 1}: {self.reason}"


class NotSorted(HdtxError):
    pass


class DuplicateTriple(HdtxError):
    pass


class SubjectGap(HdtxError):
    pass


class IdOutOfRange(HdtxError):
    pass


class CapacityExceeded(HdtxError):
    pass


class MappingIncomplete(HdtxError):
    pass


class FormatError(HdtxError):
    """The file is structurally invalid."""


class BadMagic(FormatError):
    pass


class VersionUnsupported(FormatError):
    pass


class Truncated(FormatError):
    pass


class ChecksumMismatch(FormatError):
    def __init__(self, section: str):
        self.section = section
        super().__init__(f"checksum mismatch in section {section!r}")
