"""Command-line front end.

Every subcommand that changes the store loads the snapshot directory,
applies the change and saves it back. Exit codes: 0 success, 1 usage,
2 data error, 3 transport error.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

from .bench import BenchConfig, bench
from .config import HierarchyConfig
from .dynamics import Feedback, FeedbackKind, apply_feedback, decay
from .encoder import HashEmbedder, RemoteEmbedder
from .exceptions import HMemError, TransportError
from .ingest import LLMExtractor, extract_stub, ingest_turn, load_corpus, pair_turns
from .persistence import load, save
from .retrieval import flat_retrieve, retrieve
from .service import hit_rows
from .store import MemoryStore, NodeId, compact, verify_integrity
from .synthetic import synthetic_corpus

log = logging.getLogger("hiermem")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRANSPORT = 0, 1, 2, 3
EXCERPT = 60


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


class _DataError(Exception):
    pass


class _UsageError(Exception):
    pass


def _store_dir(args) -> Path:
    d = args.store or os.environ.get("HMEM_STORE_DIR")
    if not d:
        raise _UsageError("no store directory: pass --store or set HMEM_STORE_DIR")
    return Path(d)


def _open(args, *, create: bool = False) -> tuple[MemoryStore, Path]:
    path = _store_dir(args)
    if (path / "manifest.json").exists():
        return load(path), path
    if not create:
        raise _DataError(f"no store at {path} (run `hiermem ingest` first)")
    cfg = HierarchyConfig(levels=args.levels, dim=args.dim)
    return MemoryStore(cfg), path


def _embedder_for(store: MemoryStore, remote: bool = False):
    info = store.meta.get("embedder")
    if remote or (info and info.get("kind") == "remote"):
        emb = RemoteEmbedder.from_env(store.dim)
    else:
        emb = HashEmbedder(store.dim)
    if info and info.get("kind") != emb.kind:
        raise _DataError(f"store was built with a {info['kind']} embedder, cannot mix with {emb.kind}")
    store.meta["embedder"] = emb.describe()
    return emb


def cmd_ingest(args) -> int:
    store, path = _open(args, create=True)
    embedder = _embedder_for(store, remote=args.remote_embed)
    extractor = LLMExtractor.from_env() if args.llm else extract_stub
    turns = load_corpus(args.corpus)
    if not args.no_pair:
        turns = pair_turns(turns)
    for turn in turns:
        ingest_turn(store, embedder, extractor, turn)
    save(store, path)
    print(f"ingested {len(turns)} interactions; store has {len(store)} episodes "
          f"(nodes per layer: {store.node_counts()})")
    return EXIT_OK


def format_hit(row: dict) -> str:
    excerpt = " ".join(row["text"].split())
    if len(excerpt) > EXCERPT:
        excerpt = excerpt[:EXCERPT - 3] + "..."
    labels = " / ".join(row["labels"])
    return f"{row['rank']:>3}  {row['similarity']:.4f}  {row['weight']:.4f}  {row['episode']}  {labels}  {excerpt}"


def cmd_query(args) -> int:
    store, path = _open(args)
    embedder = _embedder_for(store)
    q = embedder.embed(args.text)
    if args.flat:
        result = flat_retrieve(store, q, args.n)
    else:
        result = retrieve(store, q, args.k, args.n, now=args.now)
        if result.hits:
            save(store, path)  # persist the access bookkeeping
    rows = hit_rows(store, result)
    for row in rows:
        print(json.dumps(row, ensure_ascii=False) if args.json else format_hit(row))
    if not args.json:
        print(f"{len(rows)} hits, {result.sim_ops} similarity ops", file=sys.stderr)
    return EXIT_OK


def cmd_feedback(args) -> int:
    store, path = _open(args)
    fb = Feedback(FeedbackKind(args.kind), args.factor)
    weight = apply_feedback(store, NodeId.parse(args.episode), fb, args.now if args.now is not None else time.time())
    save(store, path)
    print(f"{args.episode}: {fb.kind.value} x{fb.multiplier(store.config):.4f} -> weight {weight:.4f}")
    return EXIT_OK


def cmd_decay(args) -> int:
    store, path = _open(args)
    n = decay(store, args.now)
    save(store, path)
    print(f"decayed {n} episodes")
    return EXIT_OK


def cmd_compact(args) -> int:
    store, path = _open(args)
    n = compact(store)
    save(store, path)
    print(f"pruned {n} nodes; {len(store)} episodes remain")
    return EXIT_OK


def cmd_verify(args) -> int:
    store, _ = _open(args)
    problems = verify_integrity(store)
    for p in problems:
        print(p)
    print("healthy" if not problems else f"{len(problems)} violations")
    return EXIT_OK if not problems else EXIT_DATA


def cmd_bench(args) -> int:
    if args.corpus.startswith("synthetic:"):
        turns = synthetic_corpus(int(args.corpus.split(":", 1)[1]), seed=args.seed)
    else:
        turns = load_corpus(args.corpus)
    cfg = BenchConfig(hierarchy=HierarchyConfig(levels=args.levels, dim=args.dim), k=args.k, n=args.n,
                      checkpoint_every=args.checkpoint_every, query_every=args.query_every)
    report = bench(turns, cfg)
    js, tsv = report.write(args.out)
    print(report.summary_table())
    print(f"wrote {js} and {tsv}", file=sys.stderr)
    return EXIT_OK


def cmd_serve(args) -> int:
    from .service import serve

    store, path = _open(args, create=True)
    embedder = _embedder_for(store)
    serve(store, args.addr, embedder=embedder, store_dir=path)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hiermem", description="Hierarchical semantic memory store.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def with_store(sp):
        sp.add_argument("--store", help="snapshot directory (default: $HMEM_STORE_DIR)")
        return sp

    def with_shape(sp):
        sp.add_argument("--levels", type=int, default=4, help="hierarchy depth for a new store")
        sp.add_argument("--dim", type=int, default=384, help="vector dimension for a new store")

    sp = with_store(sub.add_parser("ingest", help="ingest a dialogue corpus"))
    sp.add_argument("corpus")
    mode = sp.add_mutually_exclusive_group()
    mode.add_argument("--stub", action="store_true", help="rule-based extractor (default)")
    mode.add_argument("--llm", action="store_true", help="extract through $HMEM_LLM_URL")
    sp.add_argument("--remote-embed", action="store_true", help="embed through $HMEM_EMBED_URL")
    sp.add_argument("--no-pair", action="store_true", help="one interaction per turn instead of per turn pair")
    with_shape(sp)
    sp.set_defaults(func=cmd_ingest)

    sp = with_store(sub.add_parser("query", help="retrieve episodes for a text"))
    sp.add_argument("text")
    sp.add_argument("-k", type=int, default=None, help="per-level width")
    sp.add_argument("-n", type=int, default=None, help="number of hits")
    sp.add_argument("--flat", action="store_true", help="exhaustive baseline scan")
    sp.add_argument("--json", action="store_true", help="one JSON object per hit")
    sp.add_argument("--now", type=float, default=None, help="access timestamp to record")
    sp.set_defaults(func=cmd_query)

    sp = with_store(sub.add_parser("feedback", help="apply user feedback to an episode"))
    sp.add_argument("episode", help="episode id, e.g. 4:17")
    sp.add_argument("kind", choices=[k.value for k in FeedbackKind])
    sp.add_argument("--factor", type=float, default=None)
    sp.add_argument("--now", type=float, default=None)
    sp.set_defaults(func=cmd_feedback)

    sp = with_store(sub.add_parser("decay", help="apply time decay to every episode"))
    sp.add_argument("--now", type=float, required=True)
    sp.set_defaults(func=cmd_decay)

    sp = with_store(sub.add_parser("compact", help="prune episodes at the weight floor"))
    sp.set_defaults(func=cmd_compact)

    sp = with_store(sub.add_parser("verify", help="check structural integrity"))
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("bench", help="routed vs flat retrieval benchmark")
    sp.add_argument("corpus", help="corpus file, or synthetic:N for N generated turns")
    sp.add_argument("--out", required=True, help="report path (.json; a .tsv is written alongside)")
    sp.add_argument("-k", type=int, default=None)
    sp.add_argument("-n", type=int, default=None)
    sp.add_argument("--checkpoint-every", type=int, default=10)
    sp.add_argument("--query-every", type=int, default=1)
    sp.add_argument("--seed", type=int, default=0)
    with_shape(sp)
    sp.set_defaults(func=cmd_bench)

    sp = with_store(sub.add_parser("serve", help="run the HTTP service"))
    sp.add_argument("--addr", default="127.0.0.1:8000")
    with_shape(sp)
    sp.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"hiermem: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TransportError as exc:
        print(f"hiermem: transport error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (HMemError, _DataError, OSError, ValueError) as exc:
        print(f"hiermem: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
