"""In-memory construction of a document from N-Triples."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass
from typing import BinaryIO

import numpy as np

from hdtx.container import HdtDocument, build_header
from hdtx.dictionary import DEFAULT_BLOCK_SIZE, build_dictionary, classify_terms
from hdtx.errors import CapacityExceeded
from hdtx.ntriples import NTriplesReader
from hdtx.terms import Term
from hdtx.triples import encode_bitmap


@dataclass
class BuildConfig:
    block_size: int = DEFAULT_BLOCK_SIZE
    strict: bool = True
    # Largest number of parsed triples held for sorting; None means unlimited.
    max_triples: int | None = None


def _raw_triples(triples: Iterable) -> Iterable[tuple[bytes, bytes, bytes]]:
    for s, p, o in triples:
        if isinstance(s, Term):
            yield s.lexical, p.lexical, o.lexical
        else:
            yield s, p, o


def build_from_triples(triples: Iterable, config: BuildConfig | None = None) -> HdtDocument:
    """Build a document from triples of :class:`Term` or canonical bytes."""
    config = config or BuildConfig()
    raw = []
    for t in _raw_triples(triples):
        raw.append(t)
        if config.max_triples is not None and len(raw) > config.max_triples:
            raise CapacityExceeded(f"more than {config.max_triples} triples; build in chunks and cat them")

    classes = classify_terms(raw)
    dictionary = build_dictionary(classes, config.block_size)

    n_shared = len(classes.shared)
    subject_ids = {t: i for i, t in enumerate(classes.shared, 1)}
    object_ids = dict(subject_ids)
    subject_ids.update((t, i) for i, t in enumerate(classes.subjects, n_shared + 1))
    object_ids.update((t, i) for i, t in enumerate(classes.objects, n_shared + 1))
    predicate_ids = {t: i for i, t in enumerate(classes.predicates, 1)}

    n = len(raw)
    ids = np.empty((n, 3), dtype=np.int64)
    if n:
        ids[:, 0] = np.fromiter((subject_ids[s] for s, _, _ in raw), dtype=np.int64, count=n)
        ids[:, 1] = np.fromiter((predicate_ids[p] for _, p, _ in raw), dtype=np.int64, count=n)
        ids[:, 2] = np.fromiter((object_ids[o] for _, _, o in raw), dtype=np.int64, count=n)
        ids = ids[np.lexsort((ids[:, 2], ids[:, 1], ids[:, 0]))]
        keep = np.concatenate(([True], (np.diff(ids, axis=0) != 0).any(axis=1)))
        ids = ids[keep]
    triples_component = encode_bitmap(ids)
    return HdtDocument(build_header(dictionary, triples_component), dictionary, triples_component)


def build_from_ntriples(source: BinaryIO | Iterable[bytes], config: BuildConfig | None = None) -> HdtDocument:
    """Parse an N-Triples byte stream and build its document."""
    config = config or BuildConfig()
    reader = NTriplesReader(source, strict=config.strict)
    doc = build_from_triples(reader.raw(), config)
    doc.parse_errors = reader.errors
    return doc
