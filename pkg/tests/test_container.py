import io
import random
import struct
import zlib

import pytest

from hdtx.container import MAGIC, Header, build_header, read_document
from hdtx.errors import BadMagic, ChecksumMismatch, FormatError, Truncated, VersionUnsupported
from hdtx.synth import random_graph_pair

from conftest import build, doc_bytes


def test_rdf1_header(rdf1_doc):
    again = read_document(doc_bytes(rdf1_doc))
    assert again.header.count("triple-count") == 3
    assert again.header.count("shared-count") == 1
    assert list(again.search_ids()) == [(1, 1, 2), (1, 1, 3), (2, 2, 1)]


def test_rdf2_header_recomputed(rdf2_doc):
    h = rdf2_doc.header
    assert h.count("triple-count") == 2
    # only <o2> is both subject and object in the second example file
    assert h.count("shared-count") == 1


def test_empty_graph():
    doc = build([])
    data = doc_bytes(doc)
    again = read_document(data)
    assert again.header.as_dict() == {
        "format-version": "1", "triple-count": "0", "distinct-subjects": "0",
        "distinct-predicates": "0", "distinct-objects": "0", "shared-count": "0",
    }
    assert list(again) == []


def test_layout_of_rdf1(rdf1_doc):
    data = doc_bytes(rdf1_doc)
    assert data[:8] == MAGIC
    (hlen,) = struct.unpack_from("<I", data, 8)
    text = data[12 : 12 + hlen]
    assert text.startswith(b"format-version=1\n")
    assert struct.unpack_from("<I", data, 12 + hlen)[0] == zlib.crc32(text)
    # the shared section follows: one entry, block size 16, one block at offset 0
    pos = 16 + hlen
    count, block_size, blocks, off0, plen = struct.unpack_from("<QIQQQ", data, pos)
    assert (count, block_size, blocks, off0) == (1, 16, 1, 0)
    assert data[pos + 36 : pos + 36 + plen] == b"\x05<so1>"


def test_write_read_write_identical():
    a, _ = random_graph_pair(5, 300, 0, 0.0)
    data = doc_bytes(build(a))
    assert doc_bytes(read_document(data)) == data


def test_queries_agree_after_reload(tmp_path):
    a, _ = random_graph_pair(9, 400, 0, 0.0)
    doc = build(a)
    doc.save(tmp_path / "x.hdtx")
    with read_document(tmp_path / "x.hdtx") as again:
        assert list(again.raw_triples()) == list(doc.raw_triples())
        assert sorted(again.raw_triples()) == sorted(a)
        s, p, o = a[17]
        from hdtx.terms import Term

        assert [t for t in again.search(Term(s))] == [t for t in doc.search(Term(s))]
        assert list(again.search(Term(s), Term(p), Term(o)))
        assert list(again.search(Term(b"<http://nowhere/>"))) == []


def test_header_counts_match_full_decode():
    a, _ = random_graph_pair(11, 500, 0, 0.0)
    doc = build(a)
    h = doc.header
    assert h.count("triple-count") == len(set(a))
    assert h.count("distinct-subjects") == len({s for s, _, _ in a})
    assert h.count("distinct-objects") == len({o for _, _, o in a})
    assert h.count("distinct-predicates") == len({p for _, p, _ in a})
    assert h.count("shared-count") == len({s for s, _, _ in a} & {o for _, _, o in a})
    assert build_header(doc.dictionary, doc.triples) == h


def test_unknown_header_keys_ignored(rdf1_doc):
    h = Header(rdf1_doc.header.entries + [("generator", "test")])
    buf = io.BytesIO()
    from hdtx.container import write_parts

    write_parts(buf, h, rdf1_doc.dictionary.sections(), rdf1_doc.triples.write_to)
    assert read_document(buf.getvalue()).header.get("generator") == "test"


def test_bad_magic_and_version(rdf1_doc):
    data = doc_bytes(rdf1_doc)
    with pytest.raises(BadMagic):
        read_document(b"XXXX" + data[4:])
    with pytest.raises(VersionUnsupported):
        read_document(b"HDTX0002" + data[8:])


def test_truncated(rdf1_doc, tmp_path):
    data = doc_bytes(rdf1_doc)
    for cut in (3, 10, len(data) // 2, len(data) - 1):
        with pytest.raises(Truncated):
            read_document(data[:cut])
    (tmp_path / "empty").write_bytes(b"")
    with pytest.raises(Truncated):
        read_document(tmp_path / "empty")


def test_trailing_bytes(rdf1_doc):
    with pytest.raises(FormatError):
        read_document(doc_bytes(rdf1_doc) + b"\0")


def test_payload_corruption_names_section(rdf1_doc):
    data = bytearray(doc_bytes(rdf1_doc))
    i = data.index(b"<so1>")  # inside the shared section payload
    data[i + 1] ^= 0x01
    with pytest.raises(ChecksumMismatch) as info:
        read_document(bytes(data))
    assert info.value.section == "shared"


def test_consistent_but_wrong_header_rejected(rdf1_doc):
    from hdtx.container import write_parts

    entries = [(k, "7" if k == "triple-count" else v) for k, v in rdf1_doc.header.entries]
    buf = io.BytesIO()
    write_parts(buf, Header(entries), rdf1_doc.dictionary.sections(), rdf1_doc.triples.write_to)
    with pytest.raises(FormatError, match="triple-count"):
        read_document(buf.getvalue())


def corruption_sweep(data: bytes, positions, rng):
    """Flip one byte at each position; every variant must be rejected cleanly."""
    outcomes = {}
    for pos in positions:
        bad = bytearray(data)
        bad[pos] ^= rng.randrange(1, 256)
        try:
            read_document(bytes(bad))
        except FormatError as exc:
            outcomes[pos] = type(exc).__name__
        else:
            outcomes[pos] = None
    return outcomes


def test_corruption_sweep_small(rdf1_doc):
    data = doc_bytes(rdf1_doc)
    outcomes = corruption_sweep(data, range(len(data)), random.Random(1))
    assert None not in outcomes.values()
