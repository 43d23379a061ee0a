"""Bitmap triples: ID triples sorted by (s, p, o) stored as two packed ID
sequences plus two bit sequences.

``seq_p`` lists the predicates of each subject in turn and ``bit_p`` has a
1 on the last predicate of every subject.  ``seq_o`` lists the objects of
each (subject, predicate) pair and ``bit_o`` has a 1 on the last object
of every pair.  Subject IDs are implicit: subject ``k`` owns the ``k``-th
run of ``bit_p``.
"""

from __future__ import annotations

import tempfile
from array import array
from collections.abc import Iterable, Iterator
from typing import BinaryIO

import numpy as np

from hdtx.bits import BitSequence, PackedSequence, bit_width, pack_bits, pack_values
from hdtx.errors import DuplicateTriple, IdOutOfRange, NotSorted, SubjectGap

IdTriple = tuple[int, int, int]


def triple_cmp(a: IdTriple, b: IdTriple) -> int:
    """Three-way comparison on (s, p, o): -1, 0 or 1."""
    a, b = tuple(a), tuple(b)
    return (a > b) - (a < b)


class BitmapTriples:
    def __init__(self, triple_count: int, subject_count: int, bit_p: BitSequence, bit_o: BitSequence,
                 seq_p: PackedSequence, seq_o: PackedSequence):
        self.triple_count = triple_count
        self.subject_count = subject_count
        self.bit_p = bit_p
        self.bit_o = bit_o
        self.seq_p = seq_p
        self.seq_o = seq_o

    def __len__(self) -> int:
        return self.triple_count

    def check(self) -> None:
        """Raise ``ValueError`` if the component sizes are inconsistent."""
        if len(self.seq_o) != self.triple_count or len(self.bit_o) != self.triple_count:
            raise ValueError("object sequence length differs from triple count")
        if len(self.bit_p) != len(self.seq_p):
            raise ValueError("predicate bitmap and sequence lengths differ")
        if self.bit_p.ones != self.subject_count:
            raise ValueError("predicate bitmap does not mark one run per subject")
        if self.bit_o.ones != len(self.seq_p):
            raise ValueError("object bitmap does not mark one run per predicate entry")
        if self.triple_count and (not self.bit_p[len(self.bit_p) - 1] or not self.bit_o[self.triple_count - 1]):
            raise ValueError("bitmaps must end with a set bit")

    def _pred_range(self, sid: int) -> tuple[int, int]:
        start = self.bit_p.select1(sid - 1) + 1 if sid > 1 else 0
        return start, self.bit_p.next_one(start) + 1

    def subject_slice(self, sid: int) -> list[tuple[int, int]]:
        """All ``(p, o)`` pairs of subject ``sid`` in order."""
        if not 1 <= sid <= self.subject_count:
            raise IdOutOfRange(f"subject ID {sid} not in 1..{self.subject_count}")
        p_start, p_stop = self._pred_range(sid)
        bit_o, seq_o, seq_p = self.bit_o, self.seq_o, self.seq_p
        j = bit_o.select1(p_start) + 1 if p_start else 0
        out = []
        for i in range(p_start, p_stop):
            p = seq_p[i]
            end = bit_o.next_one(j)
            for k in range(j, end + 1):
                out.append((p, seq_o[k]))
            j = end + 1
        return out

    def chunks(self, chunk_subjects: int = 4096, first: int = 1, last: int | None = None
               ) -> Iterator[tuple[np.ndarray, np.ndarray, np.ndarray]]:
        """Decode subjects ``first..last`` as ``(s, p, o)`` arrays, a chunk at a time."""
        last = self.subject_count if last is None else last
        for lo in range(first, last + 1, chunk_subjects):
            hi = min(lo + chunk_subjects - 1, last)
            p_start = self._pred_range(lo)[0]
            p_stop = self._pred_range(hi)[1]
            o_start = self.bit_o.select1(p_start) + 1 if p_start else 0
            o_stop = self.bit_o.select1(p_stop) + 1
            bp = self.bit_p.to_numpy(p_start, p_stop)
            subj_of_pred = lo + np.concatenate(([0], np.cumsum(bp[:-1], dtype=np.int64)))
            bo = self.bit_o.to_numpy(o_start, o_stop)
            pred_index = np.concatenate(([0], np.cumsum(bo[:-1], dtype=np.int64)))
            preds = self.seq_p.to_numpy(p_start, p_stop)
            s = subj_of_pred[pred_index].astype(np.uint64)
            yield s, preds[pred_index], self.seq_o.to_numpy(o_start, o_stop)

    def decode(self) -> np.ndarray:
        """All triples as an ``(n, 3)`` uint64 array."""
        parts = [np.column_stack(c) for c in self.chunks()]
        return np.concatenate(parts) if parts else np.zeros((0, 3), dtype=np.uint64)

    def __iter__(self) -> Iterator[IdTriple]:
        for s, p, o in self.chunks():
            yield from zip(s.tolist(), p.tolist(), o.tolist())

    def search(self, s: int = 0, p: int = 0, o: int = 0) -> Iterator[IdTriple]:
        """Triples matching a pattern where 0 is a wildcard, in (s, p, o) order.

        Subject-bound patterns read one subject's slice; all others scan.
        """
        if s:
            if not 1 <= s <= self.subject_count:
                return
            for pp, oo in self.subject_slice(s):
                if (not p or pp == p) and (not o or oo == o):
                    yield s, pp, oo
            return
        for ss, pp, oo in self.chunks():
            mask = np.ones(len(ss), dtype=bool)
            if p:
                mask &= pp == p
            if o:
                mask &= oo == o
            yield from zip(ss[mask].tolist(), pp[mask].tolist(), oo[mask].tolist())

    def write_to(self, sink: BinaryIO) -> None:
        write_triples_component(
            sink, self.triple_count, self.subject_count,
            len(self.bit_p), [self.bit_p.word_bytes()],
            len(self.bit_o), [self.bit_o.word_bytes()],
            self.seq_p.width, [self.seq_p.word_bytes()],
            self.seq_o.width, [self.seq_o.word_bytes()],
        )


def write_triples_component(sink, triple_count, subject_count, bitp_len, bitp_chunks, bito_len,
                            bito_chunks, width_p, seqp_chunks, width_o, seqo_chunks) -> None:
    sink.write(triple_count.to_bytes(8, "little"))
    sink.write(subject_count.to_bytes(8, "little"))
    sink.write(bitp_len.to_bytes(8, "little"))
    for chunk in bitp_chunks:
        sink.write(chunk)
    sink.write(bito_len.to_bytes(8, "little"))
    for chunk in bito_chunks:
        sink.write(chunk)
    sink.write(bytes((width_p,)))
    for chunk in seqp_chunks:
        sink.write(chunk)
    sink.write(bytes((width_o,)))
    for chunk in seqo_chunks:
        sink.write(chunk)


def encode_bitmap(triples) -> BitmapTriples:
    """Encode strictly increasing ID triples whose subjects run 1..n without gaps."""
    arr = np.asarray(triples if not isinstance(triples, Iterator) else list(triples), dtype=np.int64)
    arr = arr.reshape(-1, 3)
    n = len(arr)
    if n == 0:
        empty = BitSequence(0)
        return BitmapTriples(0, 0, empty, empty, PackedSequence(0, 1), PackedSequence(0, 1))
    if (arr <= 0).any():
        raise ValueError("IDs must be positive")
    s, p, o = arr[:, 0], arr[:, 1], arr[:, 2]
    ds, dp, do = np.diff(s), np.diff(p), np.diff(o)
    same_sp = (ds == 0) & (dp == 0)
    dup = same_sp & (do == 0)
    if dup.any():
        i = int(np.flatnonzero(dup)[0])
        raise DuplicateTriple(f"triple {tuple(arr[i + 1].tolist())} repeated")
    increasing = (ds > 0) | ((ds == 0) & (dp > 0)) | (same_sp & (do > 0))
    if not increasing.all():
        i = int(np.flatnonzero(~increasing)[0])
        raise NotSorted(f"triple {tuple(arr[i + 1].tolist())} after {tuple(arr[i].tolist())}")
    if s[0] != 1 or (ds > 1).any():
        raise SubjectGap("subject IDs must run from 1 without gaps")
    last_of_pair = np.concatenate((~same_sp, [True]))
    seq_p = p[last_of_pair]
    subj_of_pred = s[last_of_pair]
    last_of_subject = np.concatenate((np.diff(subj_of_pred) != 0, [True]))
    return BitmapTriples(
        n, int(s[-1]),
        BitSequence.from_bits(last_of_subject), BitSequence.from_bits(last_of_pair),
        PackedSequence.from_values(seq_p), PackedSequence.from_values(o),
    )


class _Spool:
    """Append-only integer array that spills to a temporary file."""

    def __init__(self, typecode: str, tmp_dir: str | None, limit: int = 1 << 16):
        self.typecode = typecode
        self.buf = array(typecode)
        self.limit = limit
        self.tmp_dir = tmp_dir
        self.file: BinaryIO | None = None
        self.length = 0

    def append(self, v: int) -> None:
        self.buf.append(v)
        self.length += 1
        if len(self.buf) >= self.limit:
            if self.file is None:
                self.file = tempfile.TemporaryFile(dir=self.tmp_dir)
            self.buf.tofile(self.file)
            self.buf = array(self.typecode)

    def chunks(self, size: int) -> Iterator[np.ndarray]:
        """Read back in chunks of ``size`` values (the last may be shorter)."""
        dtype = np.uint8 if self.typecode == "B" else np.uint64
        itemsize = np.dtype(dtype).itemsize
        pending = np.zeros(0, dtype=dtype)
        if self.file is not None:
            self.file.flush()
            self.file.seek(0)
            while True:
                raw = self.file.read(size * itemsize)
                if not raw:
                    break
                data = np.concatenate((pending, np.frombuffer(raw, dtype=dtype)))
                full = len(data) - len(data) % size
                for i in range(0, full, size):
                    yield data[i : i + size]
                pending = data[full:]
        tail = np.concatenate((pending, np.frombuffer(self.buf, dtype=dtype) if len(self.buf) else pending[:0]))
        for i in range(0, len(tail), size):
            yield tail[i : i + size]

    def close(self) -> None:
        if self.file is not None:
            self.file.close()


class BitmapTriplesWriter:
    """Streaming encoder: triples go in one at a time, in order.

    The ID sequences are spooled to temporary files so memory stays flat;
    :meth:`finish` packs them into the output sink.
    """

    CHUNK = 64 * 1024  # values per packing step; a multiple of 64

    def __init__(self, tmp_dir: str | None = None):
        self.seq_p = _Spool("Q", tmp_dir)
        self.seq_o = _Spool("Q", tmp_dir)
        self.bit_p = _Spool("B", tmp_dir)
        self.bit_o = _Spool("B", tmp_dir)
        self.triple_count = 0
        self.subject_count = 0
        self.max_p = 0
        self.max_o = 0
        self._last: IdTriple | None = None

    def add(self, s: int, p: int, o: int) -> None:
        last = self._last
        if last is None:
            if s != 1:
                raise SubjectGap(f"first subject is {s}, expected 1")
        else:
            t = (s, p, o)
            if t <= last:
                raise (DuplicateTriple if t == last else NotSorted)(f"triple {t} after {last}")
            if s > last[0] + 1:
                raise SubjectGap(f"subject {s} follows {last[0]}")
            if s != last[0]:
                self.bit_o.append(1)
                self.bit_p.append(1)
            elif p != last[1]:
                self.bit_o.append(1)
                self.bit_p.append(0)
            else:
                self.bit_o.append(0)
        if last is None or s != last[0] or p != last[1]:
            self.seq_p.append(p)
            if p > self.max_p:
                self.max_p = p
        self.seq_o.append(o)
        if o > self.max_o:
            self.max_o = o
        self.triple_count += 1
        self.subject_count = s
        self._last = (s, p, o)

    def add_subject(self, s: int, pairs: Iterable[tuple[int, int]]) -> None:
        for p, o in pairs:
            self.add(s, p, o)

    def finish(self, sink: BinaryIO) -> None:
        if self._last is not None:
            self.bit_p.append(1)
            self.bit_o.append(1)
        size = self.CHUNK
        width_p, width_o = bit_width(self.max_p), bit_width(self.max_o)
        write_triples_component(
            sink, self.triple_count, self.subject_count,
            self.bit_p.length, (pack_bits(c) for c in self.bit_p.chunks(size)),
            self.bit_o.length, (pack_bits(c) for c in self.bit_o.chunks(size)),
            width_p, (pack_values(c, width_p) for c in self.seq_p.chunks(size)),
            width_o, (pack_values(c, width_o) for c in self.seq_o.chunks(size)),
        )
        for spool in (self.seq_p, self.seq_o, self.bit_p, self.bit_o):
            spool.close()
