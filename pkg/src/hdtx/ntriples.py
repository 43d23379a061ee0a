"""Line-oriented N-Triples reader and writer.

Terms are canonicalized while parsing: ``\\u``/``\\U`` escapes are decoded
and only the minimal escape set is re-applied, so two spellings of the same
term always yield the same bytes.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Iterator
from typing import BinaryIO

from hdtx.errors import MalformedLine
from hdtx.terms import IRI_FORBIDDEN, Term, TermTriple, escape_iri, escape_literal

SKIP = None  # returned for blank and comment-only lines

_WS = re.compile(r"[ \t]*")
_IRI = re.compile(r'<((?:[^\x00-\x20<>"{}|^`\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)>')
_PN = "A-Za-z0-9_\u00b7\u00c0-\ufffd\U00010000-\U000effff"
_BNODE = re.compile(rf"_:[{_PN}](?:[{_PN}.\-]*[{_PN}\-])?")
_LITERAL = re.compile(r'"((?:[^"\\\n\r]|\\[tbnrf"\'\\]|\\u[0-9A-Fa-f]{4}|\\U[0-9A-Fa-f]{8})*)"')
_LANG = re.compile(r"@[a-zA-Z]+(?:-[a-zA-Z0-9]+)*")
_ESCAPE = re.compile(r"\\(?:u([0-9A-Fa-f]{4})|U([0-9A-Fa-f]{8})|(.))")
_ECHAR = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}
_LITERAL_NEEDS_ESCAPE = re.compile(r"[\x00-\x08\x09\x0b\x0c\x0e-\x1f\x7f]")


def _unescape(body: str, pos: int) -> str:
    def repl(m: re.Match) -> str:
        code = m.group(1) or m.group(2)
        if code is None:
            return _ECHAR[m.group(3)]
        cp = int(code, 16)
        if cp > 0x10FFFF or 0xD800 <= cp <= 0xDFFF:
            raise MalformedLine(f"escape {m.group(0)!r} is not a Unicode scalar value", pos)
        return chr(cp)

    return _ESCAPE.sub(repl, body)


def _canonical_iri(body: str, pos: int) -> str:
    if "\\" in body:
        body = escape_iri(_unescape(body, pos))
    return f"<{body}>"


def _canonical_literal(body: str, pos: int) -> str:
    if "\\" in body:
        body = escape_literal(_unescape(body, pos))
    elif _LITERAL_NEEDS_ESCAPE.search(body):
        body = escape_literal(body)
    return f'"{body}"'


_VALID_ESCAPE = re.compile(r'\\(?:[tbnrf"\'\\]|u[0-9A-Fa-f]{4}|U[0-9A-Fa-f]{8})')


def _diagnose(text: str, pos: int, close: str, kind: str) -> MalformedLine:
    i = pos + 1
    while i < len(text):
        c = text[i]
        if c == close:
            break
        if c == "\\":
            m = _VALID_ESCAPE.match(text, i)
            if not m or (close == ">" and m.group(0)[1] not in "uU"):
                return MalformedLine("invalid escape sequence", i)
            i = m.end()
            continue
        if close == ">" and c in IRI_FORBIDDEN:
            return MalformedLine(f"character {c!r} not allowed in IRI", i)
        i += 1
    return MalformedLine(f"unterminated {kind}", pos)


def _read_term(text: str, pos: int) -> tuple[str, int]:
    """Read one term starting at ``pos``; return (canonical text, end)."""
    c = text[pos : pos + 1]
    if c == "<":
        m = _IRI.match(text, pos)
        if not m:
            raise _diagnose(text, pos, ">", "IRI")
        return _canonical_iri(m.group(1), pos), m.end()
    if c == "_":
        m = _BNODE.match(text, pos)
        if not m:
            raise MalformedLine("malformed blank node label", pos)
        return m.group(0), m.end()
    if c == '"':
        m = _LITERAL.match(text, pos)
        if not m:
            raise _diagnose(text, pos, '"', "literal")
        out = _canonical_literal(m.group(1), pos)
        end = m.end()
        if text.startswith("^^", end):
            dm = _IRI.match(text, end + 2)
            if not dm:
                raise MalformedLine("malformed datatype IRI", end + 2)
            return out + "^^" + _canonical_iri(dm.group(1), end + 2), dm.end()
        if text.startswith("@", end):
            lm = _LANG.match(text, end)
            if not lm:
                raise MalformedLine("malformed language tag", end)
            return out + lm.group(0), lm.end()
        return out, end
    if not c:
        raise MalformedLine("unexpected end of line", pos)
    raise MalformedLine(f"unexpected character {c!r}", pos)


def _parse(text: str) -> tuple[bytes, bytes, bytes] | None:
    pos = _WS.match(text).end()
    if pos == len(text) or text[pos] == "#":
        return SKIP
    s, pos = _read_term(text, pos)
    if s[0] == '"':
        raise MalformedLine("a literal cannot be a subject", 0)
    pos = _WS.match(text, pos).end()
    p_start = pos
    p, pos = _read_term(text, pos)
    if p[0] != "<":
        raise MalformedLine("the predicate must be an IRI", p_start)
    pos = _WS.match(text, pos).end()
    o, pos = _read_term(text, pos)
    pos = _WS.match(text, pos).end()
    if text[pos : pos + 1] != ".":
        raise MalformedLine("missing terminal '.'", pos)
    pos = _WS.match(text, pos + 1).end()
    if pos != len(text) and text[pos] != "#":
        raise MalformedLine("trailing characters after '.'", pos)
    return s.encode(), p.encode(), o.encode()


def _decode(line: bytes) -> str:
    try:
        return line.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedLine("invalid UTF-8", exc.start) from None


def parse_line_raw(line: bytes) -> tuple[bytes, bytes, bytes] | None:
    """Like :func:`parse_ntriples_line` but returns the three canonical byte strings."""
    return _parse(_decode(line))


def parse_ntriples_line(line: bytes | str) -> TermTriple | None:
    """Parse one physical line (no trailing newline).

    Returns ``None`` for blank lines and comments.
    """
    text = _decode(line) if isinstance(line, bytes) else line
    raw = _parse(text)
    if raw is SKIP:
        return SKIP
    return TermTriple(Term(raw[0]), Term(raw[1]), Term(raw[2]))


def parse_term(text: str | bytes) -> Term:
    if isinstance(text, bytes):
        text = _decode(text)
    text = text.strip(" \t")
    out, end = _read_term(text, 0)
    if end != len(text):
        raise MalformedLine("trailing characters after term", end)
    return Term(out.encode())


class NTriplesReader:
    """Iterate over the triples of an N-Triples byte stream.

    In strict mode the first malformed line raises :class:`MalformedLine`
    carrying its line number; in lax mode bad lines are skipped and
    collected in :attr:`errors`.  Only one line is held at a time.
    """

    def __init__(self, source: BinaryIO | Iterable[bytes], strict: bool = True):
        self.source = source
        self.strict = strict
        self.errors: list[MalformedLine] = []
        self.lines = 0

    def raw(self) -> Iterator[tuple[bytes, bytes, bytes]]:
        for lineno, line in enumerate(self.source, 1):
            self.lines = lineno
            if line.endswith(b"\n"):
                line = line[:-1]
                if line.endswith(b"\r"):
                    line = line[:-1]
            try:
                parsed = _parse(_decode(line))
            except MalformedLine as exc:
                exc.line_number = lineno
                if self.strict:
                    raise
                self.errors.append(exc)
                continue
            if parsed is not SKIP:
                yield parsed

    def __iter__(self) -> Iterator[TermTriple]:
        for s, p, o in self.raw():
            yield TermTriple(Term(s), Term(p), Term(o))


def parse_ntriples_stream(source: BinaryIO | Iterable[bytes], strict: bool = True) -> Iterator[TermTriple]:
    return iter(NTriplesReader(source, strict))


def serialize_triple(t: TermTriple | tuple) -> bytes:
    s, p, o = t
    return b" ".join((s.lexical, p.lexical, o.lexical)) + b" ."


def serialize_raw(s: bytes, p: bytes, o: bytes) -> bytes:
    return b"%s %s %s ." % (s, p, o)


__all__ = [
    "NTriplesReader",
    "SKIP",
    "parse_line_raw",
    "parse_ntriples_line",
    "parse_ntriples_stream",
    "parse_term",
    "serialize_raw",
    "serialize_triple",
]
