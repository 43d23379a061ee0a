import io

import pytest

from hdtx.builder import BuildConfig, build_from_ntriples, build_from_triples
from hdtx.ntriples import serialize_raw

RDF1 = b"<so1> <p1> <o1> .\n<so1> <p1> <o2> .\n<s1>  <p2> <so1> .\n"
RDF2 = b"<so1> <p3> <o2> .\n<o2> <p1> <s1> .\n"


def doc_bytes(doc) -> bytes:
    buf = io.BytesIO()
    doc.write(buf)
    return buf.getvalue()


def build(triples, block_size: int = 16):
    return build_from_triples(triples, BuildConfig(block_size=block_size))


def to_ntriples(triples) -> bytes:
    return b"".join(serialize_raw(*t) + b"\n" for t in triples)


@pytest.fixture
def rdf1_doc():
    return build_from_ntriples(io.BytesIO(RDF1))


@pytest.fixture
def rdf2_doc():
    return build_from_ntriples(io.BytesIO(RDF2))
