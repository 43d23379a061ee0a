"""RDF terms and triples.

A term is identified by its canonical N-Triples serialization: IRIs as
``<...>``, blank nodes as ``_:label`` and literals as ``"..."`` with an
optional ``@lang`` or ``^^<datatype>`` suffix.  Equality and ordering are
both defined on those bytes, so the bytewise order puts literals (``"``)
before IRIs (``<``) and IRIs before blank nodes (``_``).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

_LITERAL_ESCAPES = {
    ord("\\"): "\\\\",
    ord('"'): '\\"',
    ord("\n"): "\\n",
    ord("\r"): "\\r",
    ord("\t"): "\\t",
    ord("\b"): "\\b",
    ord("\f"): "\\f",
}
for _c in [*range(0x00, 0x08), 0x0B, *range(0x0E, 0x20), 0x7F]:
    _LITERAL_ESCAPES[_c] = f"\\u{_c:04X}"

IRI_FORBIDDEN = frozenset('<>"{}|^`\\') | frozenset(chr(c) for c in range(0x21))
_IRI_ESCAPES = {ord(c): f"\\u{ord(c):04X}" for c in IRI_FORBIDDEN}


def escape_literal(value: str) -> str:
    """Canonical escaping of a literal's lexical value (without the quotes)."""
    return value.translate(_LITERAL_ESCAPES)


def escape_iri(value: str) -> str:
    return value.translate(_IRI_ESCAPES)


class TermKind(enum.Enum):
    IRI = "iri"
    BLANK = "blank"
    LITERAL = "literal"


_KIND_BY_FIRST_BYTE = {ord("<"): TermKind.IRI, ord("_"): TermKind.BLANK, ord('"'): TermKind.LITERAL}


@dataclass(frozen=True, order=True, slots=True)
class Term:
    """An RDF term held as its canonical N-Triples bytes."""

    lexical: bytes

    def __post_init__(self):
        if not self.lexical or self.lexical[0] not in _KIND_BY_FIRST_BYTE:
            raise ValueError(f"not a canonical term: {self.lexical!r}")

    @property
    def kind(self) -> TermKind:
        return _KIND_BY_FIRST_BYTE[self.lexical[0]]

    @classmethod
    def iri(cls, value: str) -> Term:
        return cls(f"<{escape_iri(value)}>".encode())

    @classmethod
    def blank(cls, label: str) -> Term:
        return cls(f"_:{label}".encode())

    @classmethod
    def literal(cls, value: str, lang: str | None = None, datatype: str | None = None) -> Term:
        if lang and datatype:
            raise ValueError("a literal has either a language tag or a datatype")
        text = f'"{escape_literal(value)}"'
        if lang:
            text += f"@{lang}"
        elif datatype:
            text += f"^^<{escape_iri(datatype)}>"
        return cls(text.encode())

    @classmethod
    def parse(cls, text: str | bytes) -> Term:
        """Parse a single term written in N-Triples syntax."""
        from hdtx.ntriples import parse_term

        return parse_term(text)

    def __str__(self) -> str:
        return self.lexical.decode("utf-8")


@dataclass(frozen=True, order=True, slots=True)
class TermTriple:
    s: Term
    p: Term
    o: Term

    def __post_init__(self):
        if self.s.kind is TermKind.LITERAL:
            raise ValueError("a literal cannot be the subject of a triple")
        if self.p.kind is not TermKind.IRI:
            raise ValueError("the predicate of a triple must be an IRI")

    def __iter__(self):
        return iter((self.s, self.p, self.o))


# Deduplicated set of triples.
Graph = frozenset


def term_order(a: Term, b: Term) -> int:
    """Three-way bytewise comparison: -1, 0 or 1."""
    x, y = a.lexical, b.lexical
    return (x > y) - (x < y)
