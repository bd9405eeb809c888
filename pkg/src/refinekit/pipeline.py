"""Corpus-scale orchestration: distill mode, refine mode, execute-only mode.

Documents are the unit of work (all chunks of a document stay on one
worker, so offset-merging needs no coordination).  Completed record ids are
appended to a cursor file; a rerun with the same manifest skips them, which
makes long runs resumable and idempotent per record id.
"""
from __future__ import annotations

import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable

from . import chunking, distill
from .client import ChatClient, ClientError, EndpointConfig
from .program import (KEEP_ALL_PROGRAM, LineIndexedDoc, ProgramParseError,
                      RefineProgram, execute_program, parse_program,
                      serialize_call)

logger = logging.getLogger(__name__)

MODE_DISTILL = "distill"
MODE_REFINE = "refine"
MODE_EXECUTE_ONLY = "execute-only"


class PipelineError(Exception):
    pass


@dataclass(frozen=True)
class CorpusRecord:
    id: str
    text: str
    score: float | None = None

    @classmethod
    def from_json_line(cls, line: str) -> "CorpusRecord":
        obj = json.loads(line)
        return cls(id=str(obj["id"]), text=obj["text"], score=obj.get("score"))


@dataclass
class RunManifest:
    mode: str
    input_path: str
    output_path: str
    report_path: str | None = None
    reject_path: str | None = None
    programs_path: str | None = None  # execute-only program cache
    cursor_path: str | None = None
    window: int = 3000
    chunk_mode: str | None = None  # defaults per mode
    overlap_target: int | None = None
    max_insert_or_replace_chars: int = 20
    min_deleted_chars: int = 10
    endpoint: EndpointConfig | None = None
    workers: int = 1
    resume: bool = True

    def __post_init__(self):
        if self.mode not in (MODE_DISTILL, MODE_REFINE, MODE_EXECUTE_ONLY):
            raise PipelineError(f"unknown mode {self.mode!r}")
        if self.mode == MODE_EXECUTE_ONLY and not self.programs_path:
            raise PipelineError("execute-only mode requires programs_path")

    @classmethod
    def from_dict(cls, obj: dict) -> "RunManifest":
        obj = dict(obj)
        endpoint = obj.pop("endpoint", None)
        manifest = cls(**obj)
        if endpoint:
            manifest.endpoint = EndpointConfig(**endpoint)
        return manifest

    @classmethod
    def from_json(cls, path: str) -> "RunManifest":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.endpoint is not None:
            out["endpoint"] = asdict(self.endpoint)
        return out

    def chunk_config(self) -> chunking.ChunkConfig:
        mode = self.chunk_mode
        if mode is None:
            mode = (chunking.TRAINING_OVERLAP if self.mode == MODE_DISTILL
                    else chunking.INFERENCE_GREEDY)
        return chunking.ChunkConfig(window=self.window, mode=mode,
                                    overlap_target=self.overlap_target)

    def thresholds(self) -> distill.FilterThresholds:
        return distill.FilterThresholds(
            max_insert_or_replace_chars=self.max_insert_or_replace_chars,
            min_deleted_chars=self.min_deleted_chars)


def read_corpus(path: str) -> list[CorpusRecord]:
    records = []
    seen = set()
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = CorpusRecord.from_json_line(line)
                if rec.id in seen:
                    raise PipelineError(f"duplicate record id {rec.id!r}")
                seen.add(rec.id)
                records.append(rec)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise PipelineError(f"cannot read corpus {path}: {exc}") from exc
    return records


class _Cursor:
    """Append-only file of completed record ids."""

    def __init__(self, path: str | None, resume: bool):
        self.done: set[str] = set()
        self._fh = None
        if path is None:
            return
        p = Path(path)
        if resume and p.exists():
            self.done = {line.strip() for line in p.read_text(encoding="utf-8")
                         .splitlines() if line.strip()}
        self._fh = open(path, "a" if resume else "w", encoding="utf-8")

    def mark(self, record_id: str) -> None:
        self.done.add(record_id)
        if self._fh is not None:
            self._fh.write(record_id + "\n")
            self._fh.flush()

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


class _Sink:
    def __init__(self, path: str | None, append: bool):
        self._fh = open(path, "a" if append else "w",
                        encoding="utf-8") if path else None

    def write_json(self, obj: dict) -> None:
        if self._fh is not None:
            self._fh.write(json.dumps(obj, ensure_ascii=False) + "\n")

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()


def _make_client(manifest: RunManifest) -> ChatClient:
    if manifest.endpoint is None:
        raise PipelineError(f"{manifest.mode} mode requires an endpoint config")
    return ChatClient(manifest.endpoint)


def _load_program_cache(path: str) -> dict[str, str]:
    cache = {}
    try:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    obj = json.loads(line)
                    cache[str(obj["id"])] = obj["program"]
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        raise PipelineError(f"cannot read programs {path}: {exc}") from exc
    return cache


def _refine_document(rec: CorpusRecord, cfg: chunking.ChunkConfig, client,
                     program_cache: dict[str, str] | None) -> dict:
    """Refine one record; returns output/report rows plus summary deltas."""
    doc = LineIndexedDoc.from_text(rec.text)
    parse_failures = 0
    programs_parsed = 0

    if program_cache is not None:
        chunks = []
        raw = program_cache.get(rec.id)
        if raw is None:
            merged = KEEP_ALL_PROGRAM
            parse_failures += 1
        else:
            try:
                merged = parse_program(raw)
                programs_parsed += 1
            except ProgramParseError:
                merged = KEEP_ALL_PROGRAM
                parse_failures += 1
    else:
        chunks = chunking.split_document(doc, cfg)
        programs: list[RefineProgram] = []
        for chunk in chunks:
            if chunk.flagged_skipped:
                programs.append(KEEP_ALL_PROGRAM)
                continue
            raw = client.request_program(chunk.full_text)
            try:
                programs.append(parse_program(raw))
                programs_parsed += 1
            except ProgramParseError:
                programs.append(KEEP_ALL_PROGRAM)
                parse_failures += 1
        merged, _dropped = chunking.merge_chunk_programs(chunks, programs)

    refined, report = execute_program(doc, merged)
    out_row = {"id": rec.id, "text": refined}
    if rec.score is not None:
        out_row["score"] = rec.score
    report_row = {
        "id": rec.id,
        "chunks": len(chunks),
        "applied": report.applied,
        "skipped": [[serialize_call(call), reason]
                    for call, reason in report.skipped],
        "untouched": report.untouched,
        "empty": report.output_empty,
        "parse_failures": parse_failures,
    }
    summary = {
        "chunks": len(chunks),
        "programs_parsed": programs_parsed,
        "parse_failures": parse_failures,
        "skipped_calls": len(report.skipped),
        "untouched": int(report.untouched),
        "empty": int(report.output_empty),
        "input_words": len(rec.text.split()),
        "output_words": len(refined.split()),
    }
    return {"out": out_row, "report": report_row, "summary": summary}


def run_refine(manifest: RunManifest, client=None) -> dict:
    """Corpus -> programs -> executed refined corpus.

    In execute-only mode programs come from a cache file and no client is
    needed.  Every input record yields exactly one output record unless its
    endpoint calls fail permanently, in which case it is left for a resumed
    run and counted in ``failed_records``.
    """
    if manifest.mode not in (MODE_REFINE, MODE_EXECUTE_ONLY):
        raise PipelineError(f"run_refine cannot run mode {manifest.mode!r}")
    program_cache = None
    if manifest.mode == MODE_EXECUTE_ONLY:
        program_cache = _load_program_cache(manifest.programs_path)
    elif client is None:
        client = _make_client(manifest)

    records = read_corpus(manifest.input_path)
    cursor = _Cursor(manifest.cursor_path, manifest.resume)
    pending = [r for r in records if r.id not in cursor.done]
    append = manifest.resume and bool(cursor.done)
    out_sink = _Sink(manifest.output_path, append)
    report_sink = _Sink(manifest.report_path, append)
    cfg = manifest.chunk_config()

    summary = {"docs": 0, "chunks": 0, "programs_parsed": 0,
               "parse_failures": 0, "skipped_calls": 0, "untouched": 0,
               "empty": 0, "failed_records": 0,
               "input_words": 0, "output_words": 0}
    lock = threading.Lock()

    def handle(rec: CorpusRecord):
        result = _refine_document(rec, cfg, client, program_cache)
        with lock:
            out_sink.write_json(result["out"])
            report_sink.write_json(result["report"])
            cursor.mark(rec.id)
            summary["docs"] += 1
            for key, value in result["summary"].items():
                summary[key] += value

    try:
        if manifest.workers <= 1:
            for rec in pending:
                try:
                    handle(rec)
                except ClientError as exc:
                    logger.error("record %s failed: %s", rec.id, exc)
                    summary["failed_records"] += 1
        else:
            with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
                futures = {pool.submit(handle, rec): rec for rec in pending}
                for fut in as_completed(futures):
                    try:
                        fut.result()
                    except ClientError as exc:
                        logger.error("record %s failed: %s",
                                     futures[fut].id, exc)
                        summary["failed_records"] += 1
    finally:
        out_sink.close()
        report_sink.close()
        cursor.close()

    summary["skipped_for_resume"] = len(records) - len(pending)
    summary["refined_tokens_ratio"] = (
        summary["output_words"] / summary["input_words"]
        if summary["input_words"] else 0.0)
    return summary


def run_distill(manifest: RunManifest, client=None) -> dict:
    """Corpus -> expert end-to-end refinement -> filtered training JSONL."""
    if manifest.mode != MODE_DISTILL:
        raise PipelineError(f"run_distill cannot run mode {manifest.mode!r}")
    if client is None:
        client = _make_client(manifest)

    records = read_corpus(manifest.input_path)
    cursor = _Cursor(manifest.cursor_path, manifest.resume)
    pending = [r for r in records if r.id not in cursor.done]
    append = manifest.resume and bool(cursor.done)
    out_sink = _Sink(manifest.output_path, append)
    reject_sink = _Sink(manifest.reject_path, append)
    cfg = manifest.chunk_config()
    thresholds = manifest.thresholds()

    summary = {"docs": 0, "pairs_attempted": 0, "accepted": 0,
               "flagged_chunks": 0, "failed_records": 0}
    rejected_by_reason: dict[str, int] = {}
    lock = threading.Lock()

    def handle(rec: CorpusRecord):
        doc = LineIndexedDoc.from_text(rec.text)
        chunks = chunking.split_document(doc, cfg)
        examples = []
        flagged = 0
        for chunk in chunks:
            if chunk.flagged_skipped:
                flagged += 1
                continue
            text = chunk.full_text
            resp = client.request_e2e_refinement(text)
            result = distill.convert_to_program(text, resp.refined_text,
                                                thresholds)
            examples.append(distill.make_example(rec.id, chunk.index, text,
                                                 result))
        with lock:
            for ex in examples:
                if ex.accepted:
                    out_sink.write_json({"doc_id": ex.doc_id,
                                         "chunk_index": ex.chunk_index,
                                         "input": ex.chunk_text,
                                         "output": ex.program_text})
                    summary["accepted"] += 1
                else:
                    reject_sink.write_json({"doc_id": ex.doc_id,
                                            "chunk_index": ex.chunk_index,
                                            "reason": ex.reason})
                    rejected_by_reason[ex.reason] = (
                        rejected_by_reason.get(ex.reason, 0) + 1)
            summary["pairs_attempted"] += len(examples)
            summary["flagged_chunks"] += flagged
            summary["docs"] += 1
            cursor.mark(rec.id)

    try:
        if manifest.workers <= 1:
            for rec in pending:
                try:
                    handle(rec)
                except ClientError as exc:
                    logger.error("record %s failed: %s", rec.id, exc)
                    summary["failed_records"] += 1
        else:
            with ThreadPoolExecutor(max_workers=manifest.workers) as pool:
                futures = {pool.submit(handle, rec): rec for rec in pending}
                for fut in as_completed(futures):
                    try:
                        fut.result()
                    except ClientError as exc:
                        logger.error("record %s failed: %s",
                                     futures[fut].id, exc)
                        summary["failed_records"] += 1
    finally:
        out_sink.close()
        reject_sink.close()
        cursor.close()

    summary["rejected_by_reason"] = rejected_by_reason
    summary["skipped_for_resume"] = len(records) - len(pending)
    return summary
