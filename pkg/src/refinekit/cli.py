"""Command-line entry point: chunk, distill, refine, execute, stats, synth-eval.

Exit codes: 0 success, 1 fatal configuration/IO error, 2 partial completion
(some records failed after retries).  ``--json`` prints a machine-readable
summary with a versioned schema.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from . import chunking, pipeline, stats, synth
from .client import EndpointConfig
from .program import LineIndexedDoc

SUMMARY_SCHEMA_VERSION = 1


class _Parser(argparse.ArgumentParser):
    # spec'd exit code for usage errors is 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def _add_endpoint_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint-url", help="chat-completions base URL")
    p.add_argument("--model", help="model name sent to the endpoint")
    p.add_argument("--api-key-env", default="REFINE_API_KEY",
                   help="environment variable holding the API key")
    p.add_argument("--max-in-flight", type=int, default=8)
    p.add_argument("--max-retries", type=int, default=3)
    p.add_argument("--timeout", type=float, default=120.0)


def _add_manifest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", help="JSON manifest file; flags override it")
    p.add_argument("--in", dest="input_path", help="input corpus JSONL")
    p.add_argument("--out", dest="output_path", help="output JSONL")
    p.add_argument("--report", dest="report_path")
    p.add_argument("--cursor", dest="cursor_path",
                   help="resume cursor file (completed record ids)")
    p.add_argument("--no-resume", action="store_true")
    p.add_argument("--window", type=int)
    p.add_argument("--overlap", dest="overlap_target", type=int)
    p.add_argument("--max-insert-or-replace-chars", type=int)
    p.add_argument("--min-deleted-chars", type=int)
    p.add_argument("--workers", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="refinekit",
                     description="Deletion-only corpus refinement pipeline.")
    parser.add_argument("--json", action="store_true",
                        help="print a machine-readable summary to stdout")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    # accepted both before and after the subcommand; SUPPRESS keeps the
    # subparser from clobbering a value set at the top level
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", default=argparse.SUPPRESS)
    common.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True,
                                parser_class=_Parser)

    p = sub.add_parser("chunk", parents=[common],
                       help="split a corpus into window-sized chunks")
    p.add_argument("--in", dest="input_path", required=True)
    p.add_argument("--out", dest="output_path", required=True)
    p.add_argument("--window", type=int, default=3000)
    p.add_argument("--mode", choices=(chunking.INFERENCE_GREEDY,
                                      chunking.TRAINING_OVERLAP),
                   default=chunking.INFERENCE_GREEDY)
    p.add_argument("--overlap", dest="overlap_target", type=int)

    p = sub.add_parser("distill", parents=[common],
                       help="build deletion-program training data via an expert")
    _add_manifest_flags(p)
    p.add_argument("--reject-log", dest="reject_path")
    _add_endpoint_flags(p)

    p = sub.add_parser("refine", parents=[common],
                       help="refine a corpus via a program-generating model")
    _add_manifest_flags(p)
    _add_endpoint_flags(p)

    p = sub.add_parser("execute", parents=[common],
                       help="execute pre-generated programs, no network")
    _add_manifest_flags(p)
    p.add_argument("--programs", dest="programs_path", required=True)

    p = sub.add_parser("stats", parents=[common],
                       help="refinement statistics for a corpus pair")
    p.add_argument("--original", required=True)
    p.add_argument("--refined", required=True)
    p.add_argument("--by-score", action="store_true")

    p = sub.add_parser("synth-eval", parents=[common],
                       help="oracle-closure evaluation on synthetic noise")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--docs", type=int, default=100)
    p.add_argument("--window", type=int, default=3000)
    p.add_argument("--rate", type=float, default=0.8,
                   help="expected injections per document, per noise kind")
    p.add_argument("--corpus-out", help="persist the labeled corpus as JSONL")
    return parser


def _build_manifest(args, mode: str) -> pipeline.RunManifest:
    base: dict = {}
    if getattr(args, "manifest", None):
        with open(args.manifest, encoding="utf-8") as fh:
            base = json.load(fh)
    base["mode"] = mode
    for key in ("input_path", "output_path", "report_path", "reject_path",
                "programs_path", "cursor_path", "window", "overlap_target",
                "max_insert_or_replace_chars", "min_deleted_chars", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    if getattr(args, "no_resume", False):
        base["resume"] = False
    if getattr(args, "endpoint_url", None):
        base["endpoint"] = {
            "base_url": args.endpoint_url,
            "model_name": args.model or "",
            "api_key_env": args.api_key_env,
            "max_in_flight": args.max_in_flight,
            "max_retries": args.max_retries,
            "timeout": args.timeout,
        }
    if "input_path" not in base or "output_path" not in base:
        raise pipeline.PipelineError("--in and --out (or a manifest) are required")
    return pipeline.RunManifest.from_dict(base)


def _cmd_chunk(args) -> dict:
    cfg = chunking.ChunkConfig(window=args.window, mode=args.mode,
                               overlap_target=args.overlap_target)
    records = pipeline.read_corpus(args.input_path)
    n_chunks = 0
    with open(args.output_path, "w", encoding="utf-8") as out:
        for rec in records:
            doc = LineIndexedDoc.from_text(rec.text)
            for chunk in chunking.split_document(doc, cfg):
                row = {"doc_id": rec.id, "chunk_index": chunk.index,
                       "line_offset": chunk.line_offset,
                       "flagged": chunk.flagged_skipped,
                       "context_line_count": chunk.context_line_count,
                       "text": chunk.full_text}
                out.write(json.dumps(row, ensure_ascii=False) + "\n")
                n_chunks += 1
    return {"docs": len(records), "chunks": n_chunks}


def _cmd_stats(args) -> dict:
    originals = {r.id: r for r in pipeline.read_corpus(args.original)}
    refined = pipeline.read_corpus(args.refined)
    missing = [r.id for r in refined if r.id not in originals]
    if missing:
        raise pipeline.PipelineError(
            f"refined ids missing from original corpus: {missing[:5]}")
    if args.by_score:
        triples = [(originals[r.id].text, r.text, originals[r.id].score)
                   for r in refined]
        grouped = stats.compute_stats_by_score(triples)
        return {key: s.to_dict() for key, s in grouped.items()}
    pairs = [(originals[r.id].text, r.text) for r in refined]
    return stats.compute_stats(pairs).to_dict()


def _cmd_synth_eval(args) -> dict:
    spec = synth.NoiseSpec(rates={kind: args.rate for kind in synth.NOISE_KINDS},
                           seed=args.seed)
    if args.corpus_out:
        docs = synth.generate_corpus(spec, args.docs)
        with open(args.corpus_out, "w", encoding="utf-8") as fh:
            for doc in docs:
                fh.write(json.dumps(doc.to_dict(), ensure_ascii=False) + "\n")
    return synth.run_closure(spec, args.docs, window=args.window)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1

    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "chunk":
            summary = _cmd_chunk(args)
        elif args.command == "distill":
            manifest = _build_manifest(args, pipeline.MODE_DISTILL)
            summary = pipeline.run_distill(manifest)
        elif args.command == "refine":
            manifest = _build_manifest(args, pipeline.MODE_REFINE)
            summary = pipeline.run_refine(manifest)
        elif args.command == "execute":
            manifest = _build_manifest(args, pipeline.MODE_EXECUTE_ONLY)
            summary = pipeline.run_refine(manifest)
        elif args.command == "stats":
            summary = _cmd_stats(args)
        else:
            summary = _cmd_synth_eval(args)
    except (pipeline.PipelineError, OSError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1

    summary = {"schema_version": SUMMARY_SCHEMA_VERSION,
               "command": args.command, **summary}
    if args.json:
        print(json.dumps(summary, ensure_ascii=False))
    else:
        for key, value in summary.items():
            print(f"{key}: {value}")
    if summary.get("failed_records"):
        return 2
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
