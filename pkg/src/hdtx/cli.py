"""Command-line front end: ``hdtx <command> ...``.

Exit codes: 0 success, 1 operational error, 2 verification mismatch.
Diagnostics go to standard error.
"""

from __future__ import annotations

import argparse
import io
import itertools
import os
import shutil
import sys
import tempfile
import time
from pathlib import Path

from hdtx import synth
from hdtx.builder import BuildConfig, build_from_ntriples, build_from_triples
from hdtx.cat import CatStats, hdt_cat
from hdtx.container import read_document
from hdtx.dictionary import DEFAULT_BLOCK_SIZE, Role
from hdtx.errors import HdtxError
from hdtx.ntriples import NTriplesReader, parse_term, serialize_raw

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH = 0, 1, 2


def _err(msg: str) -> None:
    print(f"hdtx: {msg}", file=sys.stderr)


def _tmp_dir(args) -> str | None:
    return args.tmp_dir or os.environ.get("HDTX_TMPDIR")


def _peak_rss_mb() -> float | None:
    try:
        import resource
    except ImportError:  # not available on every platform
        return None
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024


def _chunked_build(src, out: Path, args) -> int:
    """Build ``chunk_triples``-sized pieces and fold them together with cat."""
    reader = NTriplesReader(src, strict=not args.lax)
    raw = reader.raw()
    config = BuildConfig(block_size=args.block_size)
    total = 0
    with tempfile.TemporaryDirectory(prefix="hdtx-build-", dir=_tmp_dir(args)) as work:
        work = Path(work)
        acc = work / "acc.hdtx"
        build_from_triples([], config).save(acc)
        for i in itertools.count():
            chunk = list(itertools.islice(raw, args.chunk_triples))
            if not chunk:
                break
            piece = work / f"chunk{i}.hdtx"
            build_from_triples(chunk, config).save(piece)
            folded = work / "next.hdtx"
            hdt_cat(acc, piece, folded, tmp_dir=work, block_size=args.block_size)
            os.replace(folded, acc)
            piece.unlink()
            total += len(chunk)
        shutil.move(str(acc), out)
    _report_parse_errors(reader.errors)
    return total


def _report_parse_errors(errors) -> None:
    for e in errors[:10]:
        _err(f"skipped: {e}")
    if len(errors) > 10:
        _err(f"... {len(errors) - 10} more malformed lines skipped")


def cmd_rdf2hdt(args) -> int:
    out = Path(args.output)
    with open(args.input, "rb") as src:
        if args.chunk_triples:
            _chunked_build(src, out, args)
        else:
            doc = build_from_ntriples(src, BuildConfig(block_size=args.block_size, strict=not args.lax))
            doc.save(out)
            _report_parse_errors(doc.parse_errors)
    return EXIT_OK


def cmd_hdt2rdf(args) -> int:
    with read_document(args.input) as doc, open(args.output, "wb", buffering=1 << 20) as out:
        for s, p, o in doc.raw_triples():
            out.write(serialize_raw(s, p, o) + b"\n")
    return EXIT_OK


def _print_stats(stats: CatStats) -> None:
    lines = [
        f"triples-out: {stats.triples_out}",
        f"sections: shared={stats.shared} subjects={stats.subjects} objects={stats.objects} "
        f"predicates={stats.predicates}",
        "common: " + " ".join(f"{k}={v}" for k, v in stats.common.items()),
        f"peak-sublist: {stats.peak_sublist}",
        f"peak-resident-entries: {stats.peak_resident}",
        f"merge-comparisons: {stats.comparisons} (within n+m bound: {stats.merge_bound_ok})",
        f"wall-seconds: {stats.seconds:.3f}",
    ]
    rss = _peak_rss_mb()
    if rss is not None:
        lines.append(f"peak-rss-mb: {rss:.1f}")
    print("\n".join(lines), file=sys.stderr)


def cmd_cat(args) -> int:
    stats = hdt_cat(args.a, args.b, args.output, tmp_dir=_tmp_dir(args), block_size=args.block_size)
    if args.stats:
        _print_stats(stats)
    return EXIT_OK


def cmd_info(args) -> int:
    with read_document(args.input) as doc:
        for key, value in doc.header.entries:
            print(f"{key}: {value}")
        for name, sec in zip(("shared", "subjects", "objects", "predicates"), doc.dictionary.sections()):
            print(f"section {name}: {len(sec)} entries, {len(sec.payload)} payload bytes")
        t = doc.triples
        print(f"triples: seqP width {t.seq_p.width}, seqO width {t.seq_o.width}")
    return EXIT_OK


def cmd_search(args) -> int:
    pattern = [None if x == "?" else parse_term(x) for x in (args.s, args.p, args.o)]
    with read_document(args.input) as doc:
        ids = []
        for role, term in zip((Role.SUBJECT, Role.PREDICATE, Role.OBJECT), pattern):
            gid = 0 if term is None else doc.dictionary.global_id(role, term)
            if gid is None:
                return EXIT_OK  # unknown term: nothing matches
            ids.append(gid)
        d = doc.dictionary
        out = sys.stdout.buffer
        for s, p, o in doc.search_ids(*ids):
            out.write(serialize_raw(d.id_to_raw(Role.SUBJECT, s), d.id_to_raw(Role.PREDICATE, p),
                                    d.id_to_raw(Role.OBJECT, o)) + b"\n")
        out.flush()
    return EXIT_OK


def cmd_verify(args) -> int:
    with read_document(args.a) as a, read_document(args.b) as b, read_document(args.cat) as c:
        block_size = c.dictionary.shared.block_size
        expected = build_from_triples(itertools.chain(a.raw_triples(), b.raw_triples()),
                                      BuildConfig(block_size=block_size))
        want, got = set(expected.raw_triples()), set(c.raw_triples())
        if want != got:
            missing, extra = sorted(want - got), sorted(got - want)
            if missing:
                _err(f"missing from cat: {serialize_raw(*missing[0]).decode()}")
            if extra:
                _err(f"unexpected in cat: {serialize_raw(*extra[0]).decode()}")
            return EXIT_MISMATCH
        rebuilt = io.BytesIO()
        expected.write(rebuilt)
        with open(args.cat, "rb") as f:
            if f.read() != rebuilt.getvalue():
                _err("triple sets agree but the bytes differ from a fresh build")
                return EXIT_MISMATCH
    print("ok", file=sys.stderr)
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.kind == "university":
        triples = synth.university_graph(args.seed, args.triples)
        outputs = [(args.output[0], triples)]
    else:
        if len(args.output) != 2:
            _err("gen pair needs two output files")
            return EXIT_ERROR
        a, b = synth.random_graph_pair(args.seed, args.triples, args.triples, args.overlap)
        outputs = list(zip(args.output, (a, b)))
    for path, triples in outputs:
        with open(path, "wb") as f:
            f.writelines(serialize_raw(*t) + b"\n" for t in triples)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hdtx", description="Build, query and merge HDTX-1 RDF files.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("rdf2hdt", help="build a file from N-Triples")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.add_argument("--lax", action="store_true", help="skip malformed lines instead of failing")
    p.add_argument("--chunk-triples", type=int, default=0,
                   help="build chunks of this many triples and merge them with cat")
    p.add_argument("--tmp-dir")
    p.set_defaults(func=cmd_rdf2hdt)

    p = sub.add_parser("hdt2rdf", help="write a file back out as N-Triples")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_hdt2rdf)

    p = sub.add_parser("cat", help="merge two files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("output")
    p.add_argument("--tmp-dir")
    p.add_argument("--block-size", type=int, default=DEFAULT_BLOCK_SIZE)
    p.add_argument("--stats", action="store_true", help="print merge statistics to stderr")
    p.set_defaults(func=cmd_cat)

    p = sub.add_parser("info", help="print header and section sizes")
    p.add_argument("input")
    p.set_defaults(func=cmd_info)

    p = sub.add_parser("search", help="match a triple pattern; use ? as wildcard")
    p.add_argument("input")
    p.add_argument("s")
    p.add_argument("p")
    p.add_argument("o")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("verify", help="check a cat result against a rebuild from scratch")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("cat")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gen")  # hidden: synthetic inputs for experiments
    p.add_argument("kind", choices=("university", "pair"))
    p.add_argument("output", nargs="+")
    p.add_argument("-n", "--triples", type=int, default=10_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--overlap", type=float, default=0.5)
    p.set_defaults(func=cmd_gen)
    sub._choices_actions = [a for a in sub._choices_actions if a.dest != "gen"]
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        code = args.func(args)
    except (HdtxError, OSError) as e:
        _err(f"{args.command}: {e}")
        return EXIT_ERROR
    if os.environ.get("HDTX_TIMING"):
        _err(f"{args.command} took {time.perf_counter() - start:.3f}s")
    return code


if __name__ == "__main__":
    sys.exit(main())
