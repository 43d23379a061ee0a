import io
import os
import random
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from hdtx import instrument
from hdtx.cat import (
    SectionMapping,
    cat_dictionary,
    cat_documents,
    common_entries,
    compute_common_entries,
    hdt_cat,
    merge_sorted,
    merge_sorted_streams,
)
from hdtx.container import read_document
from hdtx.dictionary import SectionTag, section_build
from hdtx.errors import CapacityExceeded, FormatError, MappingIncomplete, NotSorted
from hdtx.instrument import MergeCounts
from hdtx.synth import random_graph_pair

from conftest import build, doc_bytes


def cat_bytes(d1, d2, **kw) -> bytes:
    buf = io.BytesIO()
    cat_documents(d1, d2, buf, **kw)
    return buf.getvalue()


def keyed(terms):
    return [(t, i) for i, t in enumerate(terms, 1)]


# -- merge primitive --------------------------------------------------------

def test_merge_predicates_example():
    seen = []
    counts = merge_sorted_streams(keyed([b"<p1>", b"<p2>"]), keyed([b"<p1>", b"<p3>"]),
                                  lambda k, a, b: seen.append((k, a, b)))
    assert seen == [(b"<p1>", 1, 1), (b"<p2>", 2, None), (b"<p3>", None, 2)]
    assert (counts.n_a, counts.n_b, counts.n_common, counts.n_out) == (2, 2, 1, 3)


def test_merge_with_empty_side():
    out = [k for k, _, _ in merge_sorted([], keyed([b"x", b"y"]))]
    assert out == [b"x", b"y"]


def test_merge_rejects_unsorted():
    with pytest.raises(NotSorted):
        list(merge_sorted(keyed([b"b", b"a"]), []))
    with pytest.raises(NotSorted):
        list(merge_sorted(keyed([b"a"]), keyed([b"c", b"c"])))


@given(st.sets(st.binary(max_size=4)), st.sets(st.binary(max_size=4)))
def test_merge_against_sorted_union(a, b):
    counts = MergeCounts()
    out = list(merge_sorted(keyed(sorted(a)), keyed(sorted(b)), counts))
    assert [k for k, _, _ in out] == sorted(a | b)
    assert all((va is not None) == (k in a) and (vb is not None) == (k in b) for k, va, vb in out)
    assert counts.comparisons <= len(a) + len(b)
    assert counts.n_common == len(a & b)


@given(st.sets(st.binary(max_size=3)), st.sets(st.binary(max_size=3)))
def test_common_entries_brute_force(a, b):
    sa, sb = sorted(a), sorted(b)
    got = list(common_entries(keyed(sa), keyed(sb)))
    assert got == [(t, sa.index(t) + 1, sb.index(t) + 1) for t in sorted(a & b)]


def test_compute_common_entries_sections():
    assert compute_common_entries(section_build([b"<s1>"]), section_build([b"<s1>"])) == [(b"<s1>", 1, 1)]
    assert compute_common_entries(section_build([b"<so1>"]), section_build([])) == []


# -- worked example ---------------------------------------------------------

def section_terms(sec):
    return [(t.decode(), i) for i, t in sec.entries()]


def test_worked_example_dictionary(rdf1_doc, rdf2_doc, tmp_path):
    cd = cat_dictionary(rdf1_doc.dictionary, rdf2_doc.dictionary, tmp_path)
    assert section_terms(cd.predicates) == [("<p1>", 1), ("<p2>", 2), ("<p3>", 3)]
    # bytewise order: <o2> < <s1> < <so1>
    assert section_terms(cd.shared) == [("<o2>", 1), ("<s1>", 2), ("<so1>", 3)]
    assert section_terms(cd.subjects) == []
    assert section_terms(cd.objects) == [("<o1>", 1)]
    # <s1> moves from the subject-only section of the first file to the shared section
    assert cd.mapping(1, SectionTag.S)[1] == (SectionTag.SO, 2)
    assert cd.mapping(1, SectionTag.O)[1] == (SectionTag.O, 1)
    assert cd.mapping(1, SectionTag.O)[2] == (SectionTag.SO, 1)
    assert cd.mapping(2, SectionTag.S)[1] == (SectionTag.SO, 3)
    assert cd.mapping(2, SectionTag.P)[2] == (SectionTag.P, 3)
    cat1, cat2 = cd.subject_maps
    assert [cat1[m] for m in (1, 2, 3)] == [0, 2, 1]
    assert [cat2[m] for m in (1, 2, 3)] == [1, 0, 2]


def test_worked_example_remapped_slice_is_unsorted(rdf1_doc, rdf2_doc, tmp_path):
    cd = cat_dictionary(rdf1_doc.dictionary, rdf2_doc.dictionary, tmp_path)
    objects = cd.mapping(1, SectionTag.O)
    n_so1, n_so_cat = rdf1_doc.dictionary.n_shared, cd.n_shared

    def obj(gid):
        tag, local = cd.mapping(1, SectionTag.SO)[gid] if gid <= n_so1 else objects[gid - n_so1]
        return local + (n_so_cat if tag is SectionTag.O else 0)

    remapped = [(p, obj(o)) for p, o in rdf1_doc.triples.subject_slice(1)]
    assert remapped == [(1, 4), (1, 1)]  # order lost after remapping


def test_worked_example_triples(rdf1_doc, rdf2_doc):
    out = read_document(cat_bytes(rdf1_doc, rdf2_doc))
    assert list(out.triples) == [(1, 1, 2), (2, 2, 3), (3, 1, 1), (3, 1, 4), (3, 3, 1)]
    # the subject <o2> contributes one triple, from the second file's (1, 1, 2)
    assert list(out.search_ids(1)) == [(1, 1, 2)]
    h = out.header
    assert [h.count(k) for k in ("triple-count", "distinct-subjects", "shared-count",
                                 "distinct-predicates", "distinct-objects")] == [5, 3, 3, 3, 4]


def test_worked_example_equals_rebuild(rdf1_doc, rdf2_doc):
    union = build(list(rdf1_doc.raw_triples()) + list(rdf2_doc.raw_triples()))
    assert cat_bytes(rdf1_doc, rdf2_doc) == doc_bytes(union)


# -- properties -------------------------------------------------------------

def triple_set(data: bytes):
    return set(read_document(data).raw_triples())


@pytest.mark.parametrize("seed", range(12))
def test_cat_equals_rebuild(seed):
    rng = random.Random(seed)
    overlap = [0.0, 0.5, 0.9][seed % 3]
    a, b = random_graph_pair(seed, rng.randint(0, 300), rng.randint(0, 300), overlap)
    block_size = rng.choice([1, 3, 16])
    got = cat_bytes(build(a, block_size), build(b, block_size), block_size=block_size)
    assert got == doc_bytes(build(a + b, block_size))


@pytest.mark.parametrize("seed", range(5))
def test_commutative(seed):
    a, b = random_graph_pair(seed, 200, 150, 0.5)
    da, db = build(a), build(b)
    assert cat_bytes(da, db) == cat_bytes(db, da)
    assert triple_set(cat_bytes(da, db)) == set(a) | set(b)


@pytest.mark.parametrize("seed", range(4))
def test_associative(seed):
    a, b = random_graph_pair(seed, 150, 150, 0.5)
    c, _ = random_graph_pair(seed + 50, 150, 0, 0.9)
    da, db, dc = build(a), build(b), build(c)
    left = cat_bytes(read_document(cat_bytes(da, db)), dc)
    right = cat_bytes(da, read_document(cat_bytes(db, dc)))
    assert triple_set(left) == triple_set(right) == set(a) | set(b) | set(c)


@pytest.mark.parametrize("seed", range(6))
def test_migration_soundness(seed):
    a, b = random_graph_pair(seed, 250, 250, 0.9)
    out = read_document(cat_bytes(build(a), build(b)))
    union = a + b
    subjects, objects = {s for s, _, _ in union}, {o for _, _, o in union}
    assert [t for _, t in out.dictionary.shared.entries()] == sorted(subjects & objects)
    assert [t for _, t in out.dictionary.subjects.entries()] == sorted(subjects - objects)
    assert [t for _, t in out.dictionary.objects.entries()] == sorted(objects - subjects)


@pytest.mark.parametrize("seed", range(4))
def test_mapping_targets_and_totality(seed, tmp_path):
    a, b = random_graph_pair(seed, 200, 200, 0.5)
    d1, d2 = build(a).dictionary, build(b).dictionary
    cd = cat_dictionary(d1, d2, tmp_path)
    allowed = {SectionTag.SO: {SectionTag.SO}, SectionTag.P: {SectionTag.P},
               SectionTag.S: {SectionTag.S, SectionTag.SO}, SectionTag.O: {SectionTag.O, SectionTag.SO}}
    out_sections = dict(zip(SectionTag, cd.sections()))
    for k, d in ((1, d1), (2, d2)):
        for tag in SectionTag:
            m = cd.mapping(k, tag)
            assert m.complete and len(m) == len(d.section(tag))
            for local, term in d.section(tag).entries():
                target_tag, target = m[local]
                assert target_tag in allowed[tag]
                assert out_sections[target_tag].extract_raw(target) == term
    cat1, cat2 = cd.subject_maps
    for sid in range(1, cd.n_subjects + 1):
        assert cat1[sid] or cat2[sid]


def test_merge_bound_and_bounded_residency():
    a, b = random_graph_pair(3, 2000, 2000, 0.5)
    with instrument.probing() as probe:
        stats = cat_documents(build(a), build(b), io.BytesIO())
    assert probe.merges and all(m.within_bound for m in probe.merges)
    assert stats.merge_bound_ok
    assert probe.peak_resident <= 4 * 16 + probe.peak_sublist


def test_cat_with_empty_and_self():
    a, _ = random_graph_pair(1, 300, 0, 0.0)
    da, empty = build(a), build([])
    assert cat_bytes(da, empty) == doc_bytes(da) == cat_bytes(empty, da)
    assert cat_bytes(da, da) == doc_bytes(da)
    assert cat_bytes(empty, empty) == doc_bytes(empty)


def test_hdt_cat_files_and_cleanup(rdf1_doc, rdf2_doc, tmp_path):
    rdf1_doc.save(tmp_path / "a.hdtx")
    rdf2_doc.save(tmp_path / "b.hdtx")
    work = tmp_path / "work"
    work.mkdir()
    stats = hdt_cat(tmp_path / "a.hdtx", tmp_path / "b.hdtx", tmp_path / "c.hdtx", tmp_dir=work)
    assert stats.triples_out == 5 and stats.shared == 3
    assert stats.common["S1-O2"] == 1  # <s1>
    assert stats.common["SO1-S2"] == 1  # <so1>
    assert stats.common["O1-SO2"] == 1  # <o2>
    assert stats.common["P1-P2"] == 1  # <p1>
    assert read_document(tmp_path / "c.hdtx").header.count("shared-count") == 3
    assert list(work.iterdir()) == []  # mapping files removed


def test_failure_leaves_no_output(rdf1_doc, tmp_path):
    a, b = random_graph_pair(2, 100, 100, 0.5)
    build(a).save(tmp_path / "a.hdtx")
    build(b).save(tmp_path / "b.hdtx")
    with pytest.raises(CapacityExceeded):
        hdt_cat(tmp_path / "a.hdtx", tmp_path / "b.hdtx", tmp_path / "c.hdtx", max_sublist=1)
    assert sorted(os.listdir(tmp_path)) == ["a.hdtx", "b.hdtx"]
    (tmp_path / "bad.hdtx").write_bytes(b"not a file at all")
    with pytest.raises(FormatError):
        hdt_cat(tmp_path / "a.hdtx", tmp_path / "bad.hdtx", tmp_path / "c.hdtx")
    assert not (tmp_path / "c.hdtx").exists()


def test_section_mapping_enforces_order_and_totality(tmp_path):
    m = SectionMapping(2, tmp_path / "m.bin")
    m.append(1, SectionTag.SO, 5)
    with pytest.raises(MappingIncomplete):
        m.append(3, SectionTag.SO, 6)
    with pytest.raises(MappingIncomplete):
        m.records()
    assert Path(tmp_path / "m.bin").stat().st_size == 9
