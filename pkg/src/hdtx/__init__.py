"""Compact queryable RDF files (HDTX-1) and a streaming merge of two of them."""

from hdtx.builder import BuildConfig, build_from_ntriples, build_from_triples
from hdtx.cat import CatStats, cat_documents, hdt_cat, merge_sorted, merge_sorted_streams
from hdtx.container import HdtDocument, Header, read_document, save_document, write_document
from hdtx.dictionary import DictionarySection, FourSectionDictionary, Role, SectionTag
from hdtx.errors import HdtxError
from hdtx.terms import Term, TermKind, TermTriple
from hdtx.triples import BitmapTriples

__all__ = [
    "BitmapTriples",
    "BuildConfig",
    "CatStats",
    "DictionarySection",
    "FourSectionDictionary",
    "HdtDocument",
    "HdtxError",
    "Header",
    "Role",
    "SectionTag",
    "Term",
    "TermKind",
    "TermTriple",
    "build_from_ntriples",
    "build_from_triples",
    "cat_documents",
    "hdt_cat",
    "merge_sorted",
    "merge_sorted_streams",
    "read_document",
    "save_document",
    "write_document",
]
