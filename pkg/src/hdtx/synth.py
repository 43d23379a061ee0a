"""Seeded synthetic graphs for tests and the benchmark harness.

Two generators:

* :func:`random_graph_pair` draws two graphs whose terms overlap with a
  chosen probability, mixing IRIs, blank nodes and literals.
* :func:`university_graph` emits a university-domain graph (departments,
  professors, students, courses) in the spirit of the classic benchmark
  generator; consecutive slices share ontology terms and cross-reference
  each other's entities, which makes them good inputs for chunked builds.

Triples are canonical byte tuples, ready for the builder.
"""

from __future__ import annotations

import random
from collections.abc import Iterator

from hdtx.terms import escape_literal

RawTriple = tuple[bytes, bytes, bytes]

RDF_TYPE = b"<http://www.w3.org/1999/02/22-rdf-syntax-ns#type>"
XSD_INT = b"<http://www.w3.org/2001/XMLSchema#integer>"
UB = "http://example.org/univ-bench#"


def _iri(text: str) -> bytes:
    return b"<" + text.encode() + b">"


def _literal(text: str, lang: str | None = None, datatype: bytes | None = None) -> bytes:
    out = ('"' + escape_literal(text) + '"').encode()
    if lang:
        return out + b"@" + lang.encode()
    if datatype:
        return out + b"^^" + datatype
    return out


_ODD_TEXT = ["plain", "with space", 'quote " inside', "tab\there", "line\nbreak", "ünïcödé", "", "back\\slash"]


def _node(rng: random.Random, scope: str, n: int, blanks: bool) -> bytes:
    i = rng.randrange(n)
    if blanks and i % 7 == 0:
        return f"_:{scope}b{i}".encode()
    return _iri(f"http://example.org/{scope}/r{i}")


def _object(rng: random.Random, scope: str, n: int) -> bytes:
    roll = rng.random()
    if roll < 0.6:
        return _node(rng, scope, n, True)
    i = rng.randrange(n)
    if roll < 0.75:
        return _literal(f"{rng.choice(_ODD_TEXT)} {i}")
    if roll < 0.85:
        return _literal(f"label {i}", lang=rng.choice(["en", "de", "en-GB"]))
    return _literal(str(i), datatype=XSD_INT)


def random_graph(rng: random.Random, n_triples: int, scope: str = "g", overlap: float = 0.0,
                 shared_scope: str = "shared") -> set[RawTriple]:
    """Up to ``n_triples`` distinct triples; each term comes from the shared
    vocabulary with probability ``overlap``, else from a private one."""
    n_nodes = max(4, n_triples // 3)
    n_preds = max(2, min(50, n_triples // 20 + 2))
    triples: set[RawTriple] = set()
    attempts = 0
    while len(triples) < n_triples and attempts < 4 * n_triples + 10:
        attempts += 1
        s_scope = shared_scope if rng.random() < overlap else scope
        o_scope = shared_scope if rng.random() < overlap else scope
        s = _node(rng, s_scope, n_nodes, True)
        p = _iri(f"http://example.org/vocab/p{rng.randrange(n_preds)}")
        o = _object(rng, o_scope, n_nodes)
        triples.add((s, p, o))
    return triples


def random_graph_pair(seed: int, n_a: int, n_b: int, overlap: float) -> tuple[list[RawTriple], list[RawTriple]]:
    """Two graphs sharing terms (and, at high overlap, whole triples)."""
    rng = random.Random(seed)
    a = random_graph(rng, n_a, "a", overlap)
    b = random_graph(rng, n_b, "b", overlap)
    if overlap and a:
        pool = sorted(a)
        b.update(rng.sample(pool, int(min(len(pool), n_b) * overlap / 4)))
    return sorted(a), sorted(b)


def university_graph(seed: int, n_triples: int) -> Iterator[RawTriple]:
    """Deterministic university-domain graph with exactly ``n_triples`` triples."""
    rng = random.Random(seed)
    ub = lambda name: _iri(UB + name)  # noqa: E731
    emitted = 0
    courses_seen: list[bytes] = []
    profs_seen: list[bytes] = []
    dept = 0
    while True:
        base = f"http://www.dept{dept}.univ{dept // 15}.example.edu/"
        d = _iri(base)
        batch: list[RawTriple] = [(d, RDF_TYPE, ub("Department")),
                                  (d, ub("subOrganizationOf"), _iri(f"http://www.univ{dept // 15}.example.edu"))]
        courses = [_iri(f"{base}Course{i}") for i in range(rng.randint(8, 16))]
        for c in courses:
            batch += [(c, RDF_TYPE, ub("Course")), (c, ub("name"), _literal(c[1:-1].decode().rsplit("/", 1)[1]))]
        profs = [_iri(f"{base}Professor{i}") for i in range(rng.randint(4, 8))]
        for i, prof in enumerate(profs):
            batch += [
                (prof, RDF_TYPE, ub("FullProfessor" if i == 0 else "AssociateProfessor")),
                (prof, ub("worksFor"), d),
                (prof, ub("emailAddress"), _literal(f"prof{i}@dept{dept}.example.edu")),
                (prof, ub("teacherOf"), rng.choice(courses)),
            ]
            if i == 0:
                batch.append((d, ub("headOf"), prof))
        for i in range(rng.randint(20, 40)):
            st = _iri(f"{base}Student{i}")
            batch += [
                (st, RDF_TYPE, ub("UndergraduateStudent" if i % 4 else "GraduateStudent")),
                (st, ub("memberOf"), d),
                (st, ub("name"), _literal(f"Student{i}")),
                (st, ub("advisor"), rng.choice(profs + profs_seen[-20:])),
            ]
            for c in rng.sample(courses, 2) + ([rng.choice(courses_seen)] if courses_seen else []):
                batch.append((st, ub("takesCourse"), c))
            if i % 5 == 0:
                batch.append((st, ub("age"), _literal(str(18 + i % 10), datatype=XSD_INT)))
        courses_seen = (courses_seen + courses)[-200:]
        profs_seen = (profs_seen + profs)[-200:]
        for t in dict.fromkeys(batch):
            if emitted == n_triples:
                return
            yield t
            emitted += 1
        dept += 1
