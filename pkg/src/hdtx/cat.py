"""Merge two documents into one holding the union of their triples.

The merge never rebuilds from text.  It runs in three phases:

1. Dictionary.  Every output section is produced by linear merges of
   sorted section streams.  A term lands in the shared section when it is
   a subject somewhere and an object somewhere, so besides SO1 and SO2
   the shared section takes the cross intersections S1/O2 and O1/S2.
   While the output sections are written, each source section gets a
   mapping from its local IDs to an output section and ID, and each input
   gets a table from output subject IDs back to its own subject IDs.
2. Triples.  For each output subject the (p, o) pairs of the matching
   source subjects are fetched, remapped, sorted and deduplicated.
   Remapping can reorder pairs because terms change section, so a plain
   comparison sort is used per subject.
3. Header.  Counts come from the produced components.

All mapping tables live in temporary files.  Apart from those, only one
decoded entry per open section iterator and one subject's triples are in
memory at a time.
"""

from __future__ import annotations

import mmap
import os
import struct
import tempfile
import time
from collections.abc import Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO

import numpy as np

from hdtx import instrument
from hdtx.container import HdtDocument, header_from_counts, read_document, write_parts
from hdtx.dictionary import DEFAULT_BLOCK_SIZE, DictionarySection, SectionTag, SectionWriter
from hdtx.errors import CapacityExceeded, MappingIncomplete, NotSorted
from hdtx.instrument import MergeCounts
from hdtx.triples import BitmapTriplesWriter

MAPPING_DTYPE = np.dtype([("tag", "u1"), ("id", "<u8")])


def _pull(it: Iterator, last, counts: MergeCounts, side: str):
    item = next(it, None)
    if item is None:
        return None
    if last is not None and item[0] <= last[0]:
        raise NotSorted(f"stream {side}: {item[0]!r} does not sort after {last[0]!r}")
    if side == "a":
        counts.n_a += 1
    else:
        counts.n_b += 1
    return item


def merge_sorted(a: Iterable, b: Iterable, counts: MergeCounts | None = None) -> Iterator:
    """Linear merge of two strictly increasing ``(key, value)`` streams.

    Yields ``(key, value_a, value_b)`` once per distinct key, with ``None``
    for the side that lacks it.  Each loop step makes one three-way key
    comparison and consumes at least one element, so ``counts.comparisons``
    never exceeds ``n_a + n_b``.
    """
    counts = counts if counts is not None else MergeCounts()
    probe = instrument.active()
    if probe is not None:
        probe.merges.append(counts)
    a, b = iter(a), iter(b)
    ha = _pull(a, None, counts, "a")
    hb = _pull(b, None, counts, "b")
    while ha is not None and hb is not None:
        ka, kb = ha[0], hb[0]
        counts.comparisons += 1
        if ka == kb:
            counts.n_common += 1
            counts.n_out += 1
            yield ka, ha[1], hb[1]
            ha = _pull(a, ha, counts, "a")
            hb = _pull(b, hb, counts, "b")
        elif ka < kb:
            counts.n_out += 1
            yield ka, ha[1], None
            ha = _pull(a, ha, counts, "a")
        else:
            counts.n_out += 1
            yield kb, None, hb[1]
            hb = _pull(b, hb, counts, "b")
    while ha is not None:
        counts.n_out += 1
        yield ha[0], ha[1], None
        ha = _pull(a, ha, counts, "a")
    while hb is not None:
        counts.n_out += 1
        yield hb[0], None, hb[1]
        hb = _pull(b, hb, counts, "b")


def merge_sorted_streams(a: Iterable, b: Iterable, emit=None) -> MergeCounts:
    """Run :func:`merge_sorted` to completion, calling ``emit(key, value_a, value_b)``."""
    counts = MergeCounts()
    for key, va, vb in merge_sorted(a, b, counts):
        if emit is not None:
            emit(key, va, vb)
    return counts


def common_entries(a: Iterable, b: Iterable, counts: MergeCounts | None = None) -> Iterator:
    """Keys present in both streams, as ``(key, value_a, value_b)``."""
    for key, va, vb in merge_sorted(a, b, counts):
        if va is not None and vb is not None:
            yield key, va, vb


def compute_common_entries(sec_x: DictionarySection, sec_y: DictionarySection) -> list[tuple[bytes, int, int]]:
    """Terms stored in both sections with their local IDs in each."""
    return list(common_entries(sec_x.keyed(), sec_y.keyed()))


def _keyed(stream: Iterable[tuple]) -> Iterator[tuple[bytes, tuple]]:
    for key, *values in stream:
        yield key, tuple(values)


class SectionMapping:
    """Local ID of one source section -> (output section tag, output local ID).

    Records are written in local-ID order to a file of fixed 9-byte
    little-endian records (u8 tag, u64 ID) and memory-mapped for reading.
    """

    def __init__(self, size: int, path: Path):
        self.size = size
        self.path = path
        self._file: BinaryIO | None = open(path, "wb")
        self._next = 1
        self._records: np.ndarray | None = None

    def append(self, local_id: int, tag: SectionTag, target: int) -> None:
        if local_id != self._next:
            raise MappingIncomplete(f"{self.path.name}: expected local ID {self._next}, got {local_id}")
        self._file.write(struct.pack("<BQ", tag, target))
        self._next += 1

    def close(self) -> None:
        if self._file is not None:
            self._file.close()
            self._file = None

    @property
    def complete(self) -> bool:
        return self._next == self.size + 1

    def records(self) -> np.ndarray:
        if self._records is None:
            self.close()
            if not self.complete:
                raise MappingIncomplete(f"{self.path.name}: {self._next - 1} of {self.size} IDs mapped")
            if self.size == 0:
                self._records = np.zeros(0, dtype=MAPPING_DTYPE)
            else:
                with open(self.path, "rb") as f:
                    mm = mmap.mmap(f.fileno(), 0, access=mmap.ACCESS_READ)
                self._records = np.frombuffer(mm, dtype=MAPPING_DTYPE)
        return self._records

    def __getitem__(self, local_id: int) -> tuple[SectionTag, int]:
        rec = self.records()[local_id - 1]
        return SectionTag(int(rec["tag"])), int(rec["id"])

    def __len__(self) -> int:
        return self.size


class DiskArray:
    """Zero-initialized u64 array backed by a memory-mapped temporary file."""

    def __init__(self, length: int, path: Path):
        self.length = length
        if length == 0:
            self.array = np.zeros(0, dtype="<u8")
            self.view = ()
            return
        with open(path, "w+b") as f:
            f.truncate(length * 8)
            self._mm = mmap.mmap(f.fileno(), length * 8)
        self.array = np.frombuffer(self._mm, dtype="<u8")
        self.view = memoryview(self._mm).cast("Q")

    def __getitem__(self, i: int) -> int:
        return self.view[i]

    def __setitem__(self, i: int, value: int) -> None:
        self.array[i] = value

    def __len__(self) -> int:
        return self.length


CatSubjectMapping = DiskArray  # index = output subject ID, value = source subject ID or 0


@dataclass
class CatDictionary:
    shared: DictionarySection
    subjects: DictionarySection
    objects: DictionarySection
    predicates: DictionarySection
    mappings: dict[tuple[int, SectionTag], SectionMapping]
    subject_maps: tuple[CatSubjectMapping, CatSubjectMapping]
    common: dict[str, int] = field(default_factory=dict)

    @property
    def n_shared(self) -> int:
        return len(self.shared)

    @property
    def n_subjects(self) -> int:
        return len(self.shared) + len(self.subjects)

    def sections(self) -> tuple[DictionarySection, ...]:
        return (self.shared, self.subjects, self.objects, self.predicates)

    def mapping(self, source: int, tag: SectionTag) -> SectionMapping:
        return self.mappings[(source, tag)]


def cat_dictionary(d1, d2, workdir: Path, block_size: int = DEFAULT_BLOCK_SIZE) -> CatDictionary:
    """Merge two four-section dictionaries; see the module docstring."""
    workdir = Path(workdir)
    dicts = {1: d1, 2: d2}
    mappings = {
        (k, tag): SectionMapping(len(d.section(tag)), workdir / f"map{k}_{tag.name}.bin")
        for k, d in dicts.items()
        for tag in SectionTag
    }
    bound = d1.n_subjects + d2.n_subjects + 1
    subject_maps = (DiskArray(bound, workdir / "catmap1.bin"), DiskArray(bound, workdir / "catmap2.bin"))
    cat1, cat2 = subject_maps
    n_so1, n_so2 = d1.n_shared, d2.n_shared
    common: dict[str, int] = {}

    def writer(name: str) -> SectionWriter:
        return SectionWriter(block_size, open(workdir / f"{name}.payload", "w+b"))

    # shared section: SO1 u SO2 u (S1 n O2) u (O1 n S2)
    so_counts, x_counts, y_counts = MergeCounts(), MergeCounts(), MergeCounts()
    so_pairs = merge_sorted(d1.shared.keyed(), d2.shared.keyed(), so_counts)
    x = common_entries(d1.subjects.keyed(), d2.objects.keyed(), x_counts)
    y = common_entries(d1.objects.keyed(), d2.subjects.keyed(), y_counts)
    cross = merge_sorted(_keyed(x), _keyed(y))
    so_out = writer("SO")
    map_so1, map_so2 = mappings[(1, SectionTag.SO)], mappings[(2, SectionTag.SO)]
    for term, so, xy in merge_sorted(_keyed(so_pairs), _keyed(cross)):
        k = so_out.add(term)
        if so is not None:
            so1, so2 = so
            if so1 is not None:
                map_so1.append(so1, SectionTag.SO, k)
                cat1[k] = so1
            if so2 is not None:
                map_so2.append(so2, SectionTag.SO, k)
                cat2[k] = so2
        else:
            xv, yv = xy
            if xv is not None:
                cat1[k] = n_so1 + xv[0]
            if yv is not None:
                cat2[k] = n_so2 + yv[1]
    shared = so_out.finish()
    n_so = len(shared)
    common["SO1-SO2"] = so_counts.n_common
    common["S1-O2"] = x_counts.n_common
    common["O1-S2"] = y_counts.n_common

    # subject-only and object-only sections: entries already in the shared
    # output section are mapped there and skipped
    def side(tag: SectionTag, name: str, record_subjects: bool) -> DictionarySection:
        pair_counts = MergeCounts()
        merged = merge_sorted(d1.section(tag).keyed(), d2.section(tag).keyed(), pair_counts)
        out = writer(name)
        m1, m2 = mappings[(1, tag)], mappings[(2, tag)]
        moved = [0, 0]
        for term, ids, k in merge_sorted(_keyed(merged), shared.keyed()):
            if ids is None:
                continue
            id1, id2 = ids
            if k is not None:
                target_tag, target = SectionTag.SO, k
                cat_id = k
                moved[0] += id1 is not None
                moved[1] += id2 is not None
            else:
                target = out.add(term)
                target_tag = tag
                cat_id = n_so + target
            if id1 is not None:
                m1.append(id1, target_tag, target)
                if record_subjects:
                    cat1[cat_id] = n_so1 + id1
            if id2 is not None:
                m2.append(id2, target_tag, target)
                if record_subjects:
                    cat2[cat_id] = n_so2 + id2
        common[f"{name}1-{name}2"] = pair_counts.n_common
        return out.finish(), moved

    subjects, (s1_moved, s2_moved) = side(SectionTag.S, "S", True)
    objects, (o1_moved, o2_moved) = side(SectionTag.O, "O", False)
    # a term of S1 in the shared output came from O2 or SO2, and so on
    common["S1-SO2"] = s1_moved - common["S1-O2"]
    common["SO1-S2"] = s2_moved - common["O1-S2"]
    common["O1-SO2"] = o1_moved - common["O1-S2"]
    common["SO1-O2"] = o2_moved - common["S1-O2"]

    p_counts = MergeCounts()
    p_out = writer("P")
    map_p1, map_p2 = mappings[(1, SectionTag.P)], mappings[(2, SectionTag.P)]
    for term, p1, p2 in merge_sorted(d1.predicates.keyed(), d2.predicates.keyed(), p_counts):
        k = p_out.add(term)
        if p1 is not None:
            map_p1.append(p1, SectionTag.P, k)
        if p2 is not None:
            map_p2.append(p2, SectionTag.P, k)
    predicates = p_out.finish()
    common["P1-P2"] = p_counts.n_common

    for m in mappings.values():
        m.close()
        if not m.complete:
            raise MappingIncomplete(f"{m.path.name}: not every source ID was mapped")
    return CatDictionary(shared, subjects, objects, predicates, mappings, subject_maps, common)


def _global_lookup(cd: CatDictionary, source: int, tags: tuple[SectionTag, ...], path: Path) -> DiskArray:
    """Flat table: source global ID -> output global ID (index 0 unused)."""
    parts = [cd.mapping(source, tag).records() for tag in tags]
    total = sum(len(p) for p in parts)
    table = DiskArray(total + 1, path)
    pos = 1
    for recs in parts:
        ids = recs["id"].astype(np.uint64)
        shift = (recs["tag"] == SectionTag.S) | (recs["tag"] == SectionTag.O)
        table.array[pos : pos + len(recs)] = ids + np.where(shift, np.uint64(cd.n_shared), np.uint64(0))
        pos += len(recs)
    return table


def cat_triples(t1, t2, cd: CatDictionary, workdir: Path,
                max_sublist: int | None = None) -> Iterator[tuple[int, int, int]]:
    """Yield the union of both triple sets in output IDs, sorted and deduplicated.

    A subject with more than ``max_sublist`` triples raises
    :class:`CapacityExceeded` instead of being sorted in memory.
    """
    workdir = Path(workdir)
    obj1 = _global_lookup(cd, 1, (SectionTag.SO, SectionTag.O), workdir / "obj1.bin").view
    obj2 = _global_lookup(cd, 2, (SectionTag.SO, SectionTag.O), workdir / "obj2.bin").view
    pred1 = _global_lookup(cd, 1, (SectionTag.P,), workdir / "pred1.bin").view
    pred2 = _global_lookup(cd, 2, (SectionTag.P,), workdir / "pred2.bin").view
    cat1, cat2 = (m.view for m in cd.subject_maps)
    probe = instrument.active()
    for s in range(1, cd.n_subjects + 1):
        a, b = cat1[s], cat2[s]
        if a and b:
            pairs = {(pred1[p], obj1[o]) for p, o in t1.subject_slice(a)}
            pairs.update((pred2[p], obj2[o]) for p, o in t2.subject_slice(b))
        elif a:
            pairs = [(pred1[p], obj1[o]) for p, o in t1.subject_slice(a)]
        elif b:
            pairs = [(pred2[p], obj2[o]) for p, o in t2.subject_slice(b)]
        else:
            raise MappingIncomplete(f"output subject {s} has no source subject")
        if max_sublist is not None and len(pairs) > max_sublist:
            raise CapacityExceeded(f"subject {s} has {len(pairs)} triples, limit is {max_sublist}")
        pairs = sorted(pairs)
        if probe is not None:
            probe.hold_sublist(len(pairs))
        for p, o in pairs:
            yield s, p, o
        if probe is not None:
            probe.release_sublist()


@dataclass
class CatStats:
    triples_out: int = 0
    shared: int = 0
    subjects: int = 0
    objects: int = 0
    predicates: int = 0
    common: dict[str, int] = field(default_factory=dict)
    peak_sublist: int = 0
    peak_resident: int = 0
    comparisons: int = 0
    merge_bound_ok: bool = True
    seconds: float = 0.0


def cat_documents(doc1: HdtDocument, doc2: HdtDocument, sink: BinaryIO, tmp_dir: str | os.PathLike | None = None,
                  block_size: int = DEFAULT_BLOCK_SIZE, max_sublist: int | None = None) -> CatStats:
    """Write the union of two documents to ``sink``."""
    started = time.perf_counter()
    tmp_root = tmp_dir if tmp_dir is not None else os.environ.get("HDTX_TMPDIR")
    with instrument.probing(instrument.active() or instrument.Probe()) as probe, \
            tempfile.TemporaryDirectory(prefix="hdtx-cat-", dir=tmp_root) as work:
        work = Path(work)
        first_merge = len(probe.merges)
        cd = cat_dictionary(doc1.dictionary, doc2.dictionary, work, block_size)
        writer = BitmapTriplesWriter(tmp_dir=work)
        for s, p, o in cat_triples(doc1.triples, doc2.triples, cd, work, max_sublist):
            writer.add(s, p, o)
        header = header_from_counts(writer.triple_count, len(cd.shared), len(cd.subjects), len(cd.objects),
                                    len(cd.predicates))
        write_parts(sink, header, cd.sections(), writer.finish)
        merges = probe.merges[first_merge:]
        return CatStats(
            triples_out=writer.triple_count,
            shared=len(cd.shared), subjects=len(cd.subjects), objects=len(cd.objects),
            predicates=len(cd.predicates), common=cd.common,
            peak_sublist=probe.peak_sublist,
            peak_resident=probe.peak_resident,
            comparisons=sum(m.comparisons for m in merges),
            merge_bound_ok=all(m.within_bound for m in merges),
            seconds=time.perf_counter() - started,
        )


def hdt_cat(path1, path2, out_path, tmp_dir=None, block_size: int = DEFAULT_BLOCK_SIZE,
            max_sublist: int | None = None) -> CatStats:
    """Cat two files into ``out_path``; nothing is left behind on failure."""
    out_path = Path(out_path)
    partial = out_path.with_name(out_path.name + ".part")
    with read_document(path1) as doc1, read_document(path2) as doc2:
        try:
            with open(partial, "wb") as sink:
                stats = cat_documents(doc1, doc2, sink, tmp_dir, block_size, max_sublist)
            os.replace(partial, out_path)
        finally:
            partial.unlink(missing_ok=True)
    return stats
