"""Front-coded dictionary sections and the four-section dictionary.

A section is a strictly increasing list of byte strings split into blocks
of ``block_size`` entries.  The first string of a block is stored whole
(``varint len``, bytes); every other one as ``varint shared_prefix``,
``varint suffix_len``, suffix.  Entry ``i`` (1-based) has local ID ``i``.
"""

from __future__ import annotations

import enum
import functools
import heapq
import io
import mmap
import os
import tempfile
from array import array
from collections.abc import Iterable, Iterator
from dataclasses import dataclass
from typing import BinaryIO, NamedTuple

from hdtx import instrument
from hdtx.bits import decode_varint, encode_varint
from hdtx.errors import IdOutOfRange, NotSorted
from hdtx.terms import Term

DEFAULT_BLOCK_SIZE = 16


class SectionTag(enum.IntEnum):
    SO = 0
    S = 1
    O = 2  # noqa: E741
    P = 3


class Role(enum.Enum):
    SUBJECT = "subject"
    PREDICATE = "predicate"
    OBJECT = "object"


def common_prefix(a: bytes, b: bytes) -> int:
    n = min(len(a), len(b))
    x = int.from_bytes(a[:n], "big") ^ int.from_bytes(b[:n], "big")
    return n if x == 0 else (n * 8 - x.bit_length()) // 8


def _raw(term) -> bytes:
    return term.lexical if isinstance(term, Term) else bytes(term)


class DictionarySection:
    """Read-only view over a front-coded section.

    ``offsets`` and ``payload`` may be backed by a memory map; only the
    block being decoded is materialized.
    """

    def __init__(self, count: int, block_size: int, offsets, payload):
        self.count = count
        self.block_size = block_size
        self.offsets = offsets
        self.payload = payload
        self.payload_len = len(payload)
        self._block = functools.lru_cache(maxsize=8)(self._decode_block)

    def __len__(self) -> int:
        return self.count

    @property
    def n_blocks(self) -> int:
        return len(self.offsets)

    def _head(self, b: int) -> bytes:
        pos = self.offsets[b]
        n, pos = decode_varint(self.payload, pos)
        return bytes(self.payload[pos : pos + n])

    def _decode_block(self, b: int) -> tuple[bytes, ...]:
        probe = instrument.active()
        n = min(self.block_size, self.count - b * self.block_size)
        if probe:
            probe.hold(n)
        payload = self.payload
        pos = self.offsets[b]
        length, pos = decode_varint(payload, pos)
        prev = bytes(payload[pos : pos + length])
        pos += length
        out = [prev]
        for _ in range(n - 1):
            shared, pos = decode_varint(payload, pos)
            length, pos = decode_varint(payload, pos)
            prev = prev[:shared] + bytes(payload[pos : pos + length])
            pos += length
            out.append(prev)
        if probe:
            probe.release(n)
        return tuple(out)

    def locate_raw(self, term: bytes) -> int | None:
        if not self.count:
            return None
        lo, hi = 0, self.n_blocks - 1
        # last block whose head is <= term
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._head(mid) <= term:
                lo = mid
            else:
                hi = mid - 1
        block = self._block(lo)
        if term < block[0]:
            return None
        for i, entry in enumerate(block):
            if entry == term:
                return lo * self.block_size + i + 1
            if entry > term:
                break
        return None

    def locate(self, term: Term | bytes) -> int | None:
        """Local ID of ``term``, or ``None`` if absent."""
        return self.locate_raw(_raw(term))

    def extract_raw(self, local_id: int) -> bytes:
        if not 1 <= local_id <= self.count:
            raise IdOutOfRange(f"local ID {local_id} not in 1..{self.count}")
        b, i = divmod(local_id - 1, self.block_size)
        return self._block(b)[i]

    def extract(self, local_id: int) -> Term:
        return Term(self.extract_raw(local_id))

    def entries(self) -> Iterator[tuple[int, bytes]]:
        """Yield ``(local_id, bytes)`` in order, keeping one decoded string."""
        if not self.count:
            return
        probe = instrument.active()
        if probe:
            probe.hold(1)
        try:
            payload = self.payload
            bs = self.block_size
            pos = 0
            prev = b""
            for local_id in range(1, self.count + 1):
                if (local_id - 1) % bs == 0:
                    length, pos = decode_varint(payload, pos)
                    prev = bytes(payload[pos : pos + length])
                else:
                    shared, pos = decode_varint(payload, pos)
                    length, pos = decode_varint(payload, pos)
                    prev = prev[:shared] + bytes(payload[pos : pos + length])
                pos += length
                yield local_id, prev
        finally:
            if probe:
                probe.release(1)

    def keyed(self) -> Iterator[tuple[bytes, int]]:
        """Yield ``(bytes, local_id)`` pairs, the shape the merge routines consume."""
        for local_id, term in self.entries():
            yield term, local_id

    def __iter__(self) -> Iterator[tuple[int, Term]]:
        for local_id, term in self.entries():
            yield local_id, Term(term)

    def terms(self) -> list[Term]:
        return [t for _, t in self]

    def write_to(self, sink: BinaryIO) -> None:
        sink.write(self.count.to_bytes(8, "little"))
        sink.write(self.block_size.to_bytes(4, "little"))
        sink.write(len(self.offsets).to_bytes(8, "little"))
        if len(self.offsets):
            sink.write(memoryview(self.offsets).cast("B"))
        sink.write(self.payload_len.to_bytes(8, "little"))
        step = 1 << 20
        for start in range(0, self.payload_len, step):
            sink.write(self.payload[start : start + step])


class SectionWriter:
    """Build a section from strictly increasing byte strings.

    The payload goes to ``sink`` (an in-memory buffer by default); only
    the block offsets and the previous string are kept.
    """

    def __init__(self, block_size: int = DEFAULT_BLOCK_SIZE, sink: BinaryIO | None = None):
        if block_size < 1:
            raise ValueError("block size must be positive")
        self.block_size = block_size
        self.sink = sink if sink is not None else io.BytesIO()
        self.count = 0
        self.offsets = array("Q")
        self._pos = 0
        self._prev: bytes | None = None

    def add(self, term: Term | bytes) -> int:
        term = _raw(term)
        prev = self._prev
        if prev is not None and term <= prev:
            raise NotSorted(f"{term!r} does not sort after {prev!r}")
        if self.count % self.block_size == 0:
            self.offsets.append(self._pos)
            chunk = encode_varint(len(term)) + term
        else:
            shared = common_prefix(prev, term)
            chunk = encode_varint(shared) + encode_varint(len(term) - shared) + term[shared:]
        self.sink.write(chunk)
        self._pos += len(chunk)
        self._prev = term
        self.count += 1
        return self.count

    def finish(self) -> DictionarySection:
        sink = self.sink
        if isinstance(sink, io.BytesIO):
            payload = sink.getvalue()
        else:
            sink.flush()
            if self._pos:
                payload = memoryview(mmap.mmap(sink.fileno(), self._pos, access=mmap.ACCESS_READ))
            else:
                payload = b""
        return DictionarySection(self.count, self.block_size, self.offsets, payload)


def section_build(terms: Iterable[Term | bytes], block_size: int = DEFAULT_BLOCK_SIZE) -> DictionarySection:
    writer = SectionWriter(block_size)
    for term in terms:
        writer.add(term)
    return writer.finish()


@dataclass
class FourSectionDictionary:
    shared: DictionarySection
    subjects: DictionarySection
    objects: DictionarySection
    predicates: DictionarySection

    @property
    def n_shared(self) -> int:
        return len(self.shared)

    @property
    def n_subjects(self) -> int:
        return len(self.shared) + len(self.subjects)

    @property
    def n_objects(self) -> int:
        return len(self.shared) + len(self.objects)

    @property
    def n_predicates(self) -> int:
        return len(self.predicates)

    def section(self, tag: SectionTag) -> DictionarySection:
        return (self.shared, self.subjects, self.objects, self.predicates)[tag]

    def global_id(self, role: Role, term: Term | bytes) -> int | None:
        raw = _raw(term)
        if role is Role.PREDICATE:
            return self.predicates.locate_raw(raw)
        local = self.shared.locate_raw(raw)
        if local is not None:
            return local
        own = self.subjects if role is Role.SUBJECT else self.objects
        local = own.locate_raw(raw)
        return None if local is None else local + self.n_shared

    def id_to_raw(self, role: Role, gid: int) -> bytes:
        if role is Role.PREDICATE:
            return self.predicates.extract_raw(gid)
        limit = self.n_subjects if role is Role.SUBJECT else self.n_objects
        if not 1 <= gid <= limit:
            raise IdOutOfRange(f"{role.value} ID {gid} not in 1..{limit}")
        if gid <= self.n_shared:
            return self.shared.extract_raw(gid)
        own = self.subjects if role is Role.SUBJECT else self.objects
        return own.extract_raw(gid - self.n_shared)

    def id_to_term(self, role: Role, gid: int) -> Term:
        return Term(self.id_to_raw(role, gid))

    def sections(self) -> tuple[DictionarySection, ...]:
        return (self.shared, self.subjects, self.objects, self.predicates)


class Classification(NamedTuple):
    shared: list[bytes]
    subjects: list[bytes]
    objects: list[bytes]
    predicates: list[bytes]


_SUBJ, _OBJ, _PRED = 1, 2, 4


def _triple_raw(t) -> tuple[bytes, bytes, bytes]:
    s, p, o = t
    return _raw(s), _raw(p), _raw(o)


def _write_run(items: list[tuple[bytes, int]], tmp_dir: str | None) -> BinaryIO:
    f = tempfile.TemporaryFile(dir=tmp_dir)
    for term, roles in items:
        f.write(encode_varint(len(term)) + term + bytes((roles,)))
    f.seek(0)
    return f


def _read_run(f: BinaryIO) -> Iterator[tuple[bytes, int]]:
    reader = io.BufferedReader(f) if not isinstance(f, io.BufferedReader) else f
    while True:
        first = reader.read(1)
        if not first:
            return
        n, shift, b = 0, 0, first[0]
        while True:
            n |= (b & 0x7F) << shift
            if b < 0x80:
                break
            shift += 7
            b = reader.read(1)[0]
        data = reader.read(n + 1)
        yield data[:n], data[n]


def classify_terms(
    triples: Iterable, spill_threshold: int | None = None, tmp_dir: str | None = None
) -> Classification:
    """Split the terms of ``triples`` into the four dictionary sections.

    Triples may hold :class:`Term` objects or raw canonical bytes.  With
    ``spill_threshold`` set, the working set of distinct terms is written
    to sorted runs on disk whenever it reaches that size and the runs are
    merged at the end.
    """
    roles: dict[bytes, int] = {}
    runs: list[BinaryIO] = []
    get = roles.get
    for t in triples:
        s, p, o = _triple_raw(t)
        roles[s] = get(s, 0) | _SUBJ
        roles[o] = get(o, 0) | _OBJ
        roles[p] = get(p, 0) | _PRED
        if spill_threshold is not None and len(roles) >= spill_threshold:
            runs.append(_write_run(sorted(roles.items()), tmp_dir))
            roles.clear()

    out = Classification([], [], [], [])
    if runs:
        merged = heapq.merge(*(_read_run(f) for f in runs), iter(sorted(roles.items())))
        stream = _coalesce(merged)
    else:
        stream = sorted(roles.items())
    for term, r in stream:
        if r & _PRED:
            out.predicates.append(term)
        both = r & (_SUBJ | _OBJ)
        if both == _SUBJ | _OBJ:
            out.shared.append(term)
        elif both == _SUBJ:
            out.subjects.append(term)
        elif both == _OBJ:
            out.objects.append(term)
    for f in runs:
        f.close()
    return out


def _coalesce(stream: Iterable[tuple[bytes, int]]) -> Iterator[tuple[bytes, int]]:
    current, acc = None, 0
    for term, r in stream:
        if term == current:
            acc |= r
            continue
        if current is not None:
            yield current, acc
        current, acc = term, r
    if current is not None:
        yield current, acc


def build_dictionary(classes: Classification, block_size: int = DEFAULT_BLOCK_SIZE) -> FourSectionDictionary:
    return FourSectionDictionary(*(section_build(terms, block_size) for terms in classes))


def open_spool(tmp_dir: str | None) -> BinaryIO:
    return tempfile.TemporaryFile(dir=tmp_dir or os.environ.get("HDTX_TMPDIR"))
