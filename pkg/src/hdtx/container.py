"""The HDTX-1 file: header, four dictionary sections and bitmap triples.

Layout (all integers little-endian)::

    magic   b"HDTX0001"
    header  u32 length, UTF-8 "key=value\\n" lines, u32 CRC-32
    SO, S, O, P sections, each:
            u64 entry count, u32 block size, u64 block count,
            block count x u64 block offsets, u64 payload length,
            front-coded payload, u32 CRC-32
    triples u64 triple count, u64 subject count,
            bitP (u64 bit length, packed words), bitO (same),
            seqP (u8 bit width, packed words), seqO (same), u32 CRC-32

Each CRC covers the bytes of its own part, from the first length or count
field up to the checksum.  A document opened from a path is memory-mapped
and decoded on demand.
"""

from __future__ import annotations

import mmap
import os
import zlib
from collections.abc import Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

from hdtx.bits import BitSequence, PackedSequence, word_count
from hdtx.dictionary import DictionarySection, FourSectionDictionary, Role
from hdtx.errors import (
    BadMagic,
    ChecksumMismatch,
    FormatError,
    Truncated,
    VersionUnsupported,
)
from hdtx.terms import Term, TermTriple
from hdtx.triples import BitmapTriples

MAGIC = b"HDTX0001"
FORMAT_VERSION = "1"
SECTION_NAMES = ("shared", "subjects", "objects", "predicates")
REQUIRED_KEYS = (
    "format-version",
    "triple-count",
    "distinct-subjects",
    "distinct-predicates",
    "distinct-objects",
    "shared-count",
)


@dataclass
class Header:
    entries: list[tuple[str, str]] = field(default_factory=list)

    def __getitem__(self, key: str) -> str:
        for k, v in self.entries:
            if k == key:
                return v
        raise KeyError(key)

    def get(self, key: str, default: str | None = None) -> str | None:
        try:
            return self[key]
        except KeyError:
            return default

    def count(self, key: str) -> int:
        return int(self[key])

    def as_dict(self) -> dict[str, str]:
        return dict(self.entries)

    def to_bytes(self) -> bytes:
        return "".join(f"{k}={v}\n" for k, v in self.entries).encode("utf-8")

    @classmethod
    def from_bytes(cls, data: bytes) -> Header:
        try:
            text = data.decode("utf-8")
        except UnicodeDecodeError:
            raise FormatError("header is not UTF-8") from None
        entries = []
        for line in text.splitlines():
            key, sep, value = line.partition("=")
            if not sep:
                raise FormatError(f"malformed header line {line!r}")
            entries.append((key, value))
        return cls(entries)


def build_header(dictionary: FourSectionDictionary, triples: BitmapTriples) -> Header:
    """Statistics computed from the components themselves."""
    return Header([
        ("format-version", FORMAT_VERSION),
        ("triple-count", str(triples.triple_count)),
        ("distinct-subjects", str(dictionary.n_subjects)),
        ("distinct-predicates", str(dictionary.n_predicates)),
        ("distinct-objects", str(dictionary.n_objects)),
        ("shared-count", str(dictionary.n_shared)),
    ])


def header_from_counts(triple_count: int, n_shared: int, n_subj_only: int, n_obj_only: int, n_pred: int) -> Header:
    return Header([
        ("format-version", FORMAT_VERSION),
        ("triple-count", str(triple_count)),
        ("distinct-subjects", str(n_shared + n_subj_only)),
        ("distinct-predicates", str(n_pred)),
        ("distinct-objects", str(n_shared + n_obj_only)),
        ("shared-count", str(n_shared)),
    ])


class ChecksumSink:
    """Pass-through writer that tracks a running CRC-32 and byte count."""

    def __init__(self, sink: BinaryIO):
        self.sink = sink
        self.crc = 0
        self.written = 0

    def write(self, data) -> int:
        data = memoryview(data).cast("B")
        self.crc = zlib.crc32(data, self.crc)
        self.written += len(data)
        self.sink.write(data)
        return len(data)

    def seal(self) -> int:
        """Write the CRC of everything since the last seal; return bytes written."""
        self.sink.write(self.crc.to_bytes(4, "little"))
        n = self.written + 4
        self.crc = 0
        self.written = 0
        return n


def write_header(sink: BinaryIO, header: Header) -> int:
    text = header.to_bytes()
    sink.write(len(text).to_bytes(4, "little"))
    sink.write(text)
    sink.write(zlib.crc32(text).to_bytes(4, "little"))
    return len(text) + 8


def write_parts(sink: BinaryIO, header: Header, sections, write_triples) -> int:
    """Write a full file from a header, four section writers and a triples writer."""
    total = len(MAGIC)
    sink.write(MAGIC)
    total += write_header(sink, header)
    crc = ChecksumSink(sink)
    for sec in sections:
        sec.write_to(crc)
        total += crc.seal()
    write_triples(crc)
    total += crc.seal()
    return total


class HdtDocument:
    """A loaded document: header, dictionary and triples."""

    def __init__(self, header: Header, dictionary: FourSectionDictionary, triples: BitmapTriples,
                 _mmap: mmap.mmap | None = None):
        self.header = header
        self.dictionary = dictionary
        self.triples = triples
        self._mmap = _mmap
        self.parse_errors: list = []

    def __enter__(self) -> HdtDocument:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def close(self) -> None:
        if self._mmap is not None:
            mm, self._mmap = self._mmap, None
            try:
                mm.close()
            except BufferError:
                pass  # views still alive; the mapping goes away with them

    @property
    def triple_count(self) -> int:
        return self.triples.triple_count

    def search_ids(self, s: int = 0, p: int = 0, o: int = 0) -> Iterator[tuple[int, int, int]]:
        return self.triples.search(s, p, o)

    def search(self, s: Term | None = None, p: Term | None = None, o: Term | None = None) -> Iterator[TermTriple]:
        """Term-level pattern search; ``None`` is a wildcard, unknown terms match nothing."""
        ids = []
        for role, term in ((Role.SUBJECT, s), (Role.PREDICATE, p), (Role.OBJECT, o)):
            if term is None:
                ids.append(0)
                continue
            gid = self.dictionary.global_id(role, term)
            if gid is None:
                return
            ids.append(gid)
        yield from self.to_terms(self.triples.search(*ids))

    def to_terms(self, id_triples) -> Iterator[TermTriple]:
        d = self.dictionary
        for s, p, o in id_triples:
            yield TermTriple(d.id_to_term(Role.SUBJECT, s), d.id_to_term(Role.PREDICATE, p),
                             d.id_to_term(Role.OBJECT, o))

    def raw_triples(self) -> Iterator[tuple[bytes, bytes, bytes]]:
        """Every triple as canonical bytes, in (s, p, o) ID order."""
        d = self.dictionary
        subj, pred, obj = Role.SUBJECT, Role.PREDICATE, Role.OBJECT
        for s, p, o in self.triples:
            yield d.id_to_raw(subj, s), d.id_to_raw(pred, p), d.id_to_raw(obj, o)

    def __iter__(self) -> Iterator[TermTriple]:
        return self.to_terms(self.triples)

    def write(self, sink: BinaryIO) -> int:
        return write_document(self, sink)

    def save(self, path: str | os.PathLike) -> int:
        return save_document(self, path)


def write_document(doc: HdtDocument, sink: BinaryIO) -> int:
    """Serialize ``doc``; the header is recomputed from its components."""
    header = build_header(doc.dictionary, doc.triples)
    return write_parts(sink, header, doc.dictionary.sections(), doc.triples.write_to)


def save_document(doc: HdtDocument, path: str | os.PathLike) -> int:
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    try:
        with open(tmp, "wb") as f:
            n = write_document(doc, f)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)
    return n


class _Reader:
    def __init__(self, buf: memoryview):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> memoryview:
        if n < 0 or self.pos + n > len(self.buf):
            raise Truncated(f"need {n} bytes at offset {self.pos}, file has {len(self.buf)}")
        out = self.buf[self.pos : self.pos + n]
        self.pos += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "little")

    def u64(self) -> int:
        return int.from_bytes(self.take(8), "little")

    def check_crc(self, start: int, name: str) -> None:
        expected = self.u32()
        if zlib.crc32(self.buf[start : self.pos - 4]) != expected:
            raise ChecksumMismatch(name)


def _read_section(r: _Reader, name: str) -> DictionarySection:
    start = r.pos
    count = r.u64()
    block_size = r.u32()
    n_blocks = r.u64()
    offsets_raw = r.take(n_blocks * 8)
    payload_len = r.u64()
    payload = r.take(payload_len)
    r.check_crc(start, name)
    if block_size == 0 or n_blocks != -(-count // block_size):
        raise FormatError(f"section {name!r}: {n_blocks} blocks for {count} entries of block size {block_size}")
    offsets = offsets_raw.cast("Q") if n_blocks else ()
    previous = -1
    for off in offsets:
        if off <= previous or off >= payload_len:
            raise FormatError(f"section {name!r}: bad block offset {off}")
        previous = off
    if n_blocks and offsets[0] != 0:
        raise FormatError(f"section {name!r}: first block does not start at 0")
    return DictionarySection(count, block_size, offsets, payload)


def _read_triples(r: _Reader) -> BitmapTriples:
    start = r.pos
    triple_count = r.u64()
    subject_count = r.u64()
    bitp_len = r.u64()
    bitp = r.take(word_count(bitp_len) * 8)
    bito_len = r.u64()
    bito = r.take(word_count(bito_len) * 8)
    width_p = r.u8()
    seqp = r.take(word_count(bitp_len * width_p) * 8)
    width_o = r.u8()
    seqo = r.take(word_count(bito_len * width_o) * 8)
    r.check_crc(start, "triples")
    if not (1 <= width_p <= 64 and 1 <= width_o <= 64):
        raise FormatError("sequence bit width out of range")
    bt = BitmapTriples(
        triple_count, subject_count,
        BitSequence(bitp_len, bitp), BitSequence(bito_len, bito),
        PackedSequence(bitp_len, width_p, seqp), PackedSequence(bito_len, width_o, seqo),
    )
    try:
        bt.check()
    except ValueError as exc:
        raise FormatError(f"triples: {exc}") from None
    return bt


def _max_value(seq: PackedSequence, step: int = 1 << 20) -> int:
    best = 0
    for start in range(0, len(seq), step):
        best = max(best, int(seq.to_numpy(start, min(start + step, len(seq))).max()))
    return best


def parse_document(buf, _mmap: mmap.mmap | None = None) -> HdtDocument:
    r = _Reader(memoryview(buf).cast("B"))
    magic = bytes(r.take(len(MAGIC)))
    if magic != MAGIC:
        if magic[:4] == MAGIC[:4]:
            raise VersionUnsupported(f"container version {magic[4:]!r} is not supported")
        raise BadMagic(f"not an HDTX file (magic {magic!r})")
    start = r.pos
    length = r.u32()
    text = bytes(r.take(length))
    r.check_crc(start + 4, "header")
    header = Header.from_bytes(text)
    if header.get("format-version") != FORMAT_VERSION:
        raise VersionUnsupported(f"format-version {header.get('format-version')!r}")
    sections = [_read_section(r, name) for name in SECTION_NAMES]
    triples = _read_triples(r)
    if r.pos != len(r.buf):
        raise FormatError(f"{len(r.buf) - r.pos} trailing bytes after the triples")
    dictionary = FourSectionDictionary(*sections)
    expected = build_header(dictionary, triples)
    for key in REQUIRED_KEYS:
        value = header.get(key)
        if value is None:
            raise FormatError(f"header lacks {key!r}")
        if value != expected[key]:
            raise FormatError(f"header {key}={value} but the components give {expected[key]}")
    if triples.subject_count != dictionary.n_subjects:
        raise FormatError("subject count differs from the dictionary")
    if _max_value(triples.seq_p) > dictionary.n_predicates:
        raise FormatError("predicate ID beyond the predicate section")
    if _max_value(triples.seq_o) > dictionary.n_objects:
        raise FormatError("object ID beyond the object sections")
    return HdtDocument(header, dictionary, triples, _mmap)


def read_document(source) -> HdtDocument:
    """Open a document from a path (memory-mapped) or from bytes."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        return parse_document(source)
    with open(source, "rb") as f:
        size = os.fstat(f.fileno()).st_size
        if size == 0:
            raise Truncated("empty file")
        mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
    try:
        return parse_document(mm, mm)
    except BaseException:
        try:
            mm.close()
        except BufferError:
            pass
        raise
