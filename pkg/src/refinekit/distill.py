"""Convert (original, expert-refined) pairs into filtered deletion programs.

The expert output is trusted only for its deletions: insert/replace spans
above the over-edit threshold reject the pair outright, tiny deletions are
discarded as near-trivial, and every accepted program must round-trip --
executing it on the original reproduces the deletion-only projection of the
expert refinement, byte for byte.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import IO, Iterable

from .editscript import (apply_deletions, compute_edit_script,
                         extract_deletions, span_stats, EditTag)
from .program import (Call, KEEP_ALL_PROGRAM, LineIndexedDoc, RefineProgram,
                      count_occurrences,
                      RemoveLines, RemoveStr, execute_program)

VERDICT_ACCEPTED = "accepted"
VERDICT_REJECTED = "rejected"

REJECT_OVER_EDIT = "over-edit"
REJECT_TOO_SMALL = "too-small-deletion"
REJECT_AMBIGUOUS = "ambiguous-mapping"


class AmbiguousMappingError(Exception):
    pass


@dataclass(frozen=True)
class FilterThresholds:
    # any single insert/replace span this long or longer rejects the pair
    max_insert_or_replace_chars: int = 20
    # pairs deleting fewer characters than this (but more than zero edits)
    # are discarded as near-trivial
    min_deleted_chars: int = 10

    def __post_init__(self):
        if self.max_insert_or_replace_chars <= 0 or self.min_deleted_chars <= 0:
            raise ValueError("thresholds must be positive")


@dataclass(frozen=True)
class DistillExample:
    doc_id: str
    chunk_index: int
    chunk_text: str
    program_text: str  # canonical serialization; "" when rejected
    verdict: str
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == VERDICT_ACCEPTED


@dataclass(frozen=True)
class ConversionResult:
    program: RefineProgram | None
    verdict: str
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.verdict == VERDICT_ACCEPTED


def _common_prefix(a: str, b: str) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[i] == b[i]:
        i += 1
    return i


def _common_suffix(a: str, b: str) -> int:
    n = min(len(a), len(b))
    i = 0
    while i < n and a[-1 - i] == b[-1 - i]:
        i += 1
    return i


def merge_adjacent_deletions(source: str,
                             deletions: list[tuple[int, int]],
                             ) -> list[tuple[int, int]]:
    """Canonicalize a deletion mask by merging neighbouring spans.

    Minimal edit scripts may split one intended deletion into equal-cost
    fragments whose kept text between them can be re-read off the region's
    edges instead (e.g. re-forming "the" out of URL characters). Two spans
    merge into one contiguous span whenever the kept text between them
    equals a prefix of the region plus a suffix of the region; the
    projection is unchanged by construction.
    """
    spans = list(deletions)
    changed = True
    while changed:
        changed = False
        merged: list[tuple[int, int]] = []
        for a, b in spans:
            if merged:
                pa, pb = merged[-1]
                gap = source[pb:a]
                region = source[pa:b]
                lcp = _common_prefix(gap, region)
                lcs = _common_suffix(gap, region)
                if lcp + lcs >= len(gap) and len(gap) < b - pa:
                    keep_left = len(gap) - min(lcs, len(gap))
                    merged[-1] = (pa + keep_left, b - (len(gap) - keep_left))
                    changed = True
                    continue
                if pb == a:
                    merged[-1] = (pa, b)
                    changed = True
                    continue
            merged.append((a, b))
        spans = merged
    return spans


def _full_line_flags(doc: LineIndexedDoc, deleted: set[int]) -> list[bool]:
    """A line is a whole-line deletion when its content is fully deleted and
    an adjacent separator went with it (either side works; the executor
    produces the same output for both attributions)."""
    n = len(doc.lines)
    flags = []
    for idx, (s, e) in enumerate(doc.spans):
        content_deleted = all(p in deleted for p in range(s, e))
        if not content_deleted:
            flags.append(False)
            continue
        nl_after = idx < n - 1 and e in deleted
        nl_before = idx > 0 and (s - 1) in deleted
        if n == 1:
            flags.append(s < e)  # whole single-line doc deleted
        else:
            flags.append(nl_after or nl_before)
    return flags


def map_deletions_to_calls(doc: LineIndexedDoc,
                           deletions: list[tuple[int, int]]) -> list[Call]:
    """Express deletion character ranges as remove_lines / remove_str calls.

    Runs of whole-line deletions collapse into remove_lines; partial
    deletions become remove_str and must be unique within their line.
    """
    deleted: set[int] = set()
    for a, b in deletions:
        deleted.update(range(a, b))

    full = _full_line_flags(doc, deleted)
    calls: list[Call] = []

    idx = 0
    n = len(doc.lines)
    while idx < n:
        if full[idx]:
            end = idx
            while end + 1 < n and full[end + 1]:
                end += 1
            calls.append(RemoveLines(idx + 1, end + 1))
            idx = end + 1
        else:
            idx += 1

    for idx, (s, e) in enumerate(doc.spans):
        if full[idx]:
            continue
        pos = s
        while pos < e:
            if pos in deleted:
                run_end = pos
                while run_end + 1 < e and (run_end + 1) in deleted:
                    run_end += 1
                sub = doc.text[pos:run_end + 1]
                if count_occurrences(doc.lines[idx], sub) != 1:
                    raise AmbiguousMappingError(
                        f"substring {sub!r} occurs more than once on line {idx + 1}")
                calls.append(RemoveStr(idx + 1, sub))
                pos = run_end + 1
            else:
                pos += 1
    return calls


def convert_to_program(original: str, refined: str,
                       thresholds: FilterThresholds = FilterThresholds(),
                       ) -> ConversionResult:
    """Distill one expert pair into a deletion program, or reject it."""
    # Line-first diffing keeps whole-line deletions line-aligned; a globally
    # minimal char script may instead scatter an equal-cost mask across line
    # boundaries, which cannot be expressed as DSL calls.
    script = compute_edit_script(original, refined, mode="hierarchical")
    stats = span_stats(script)
    limit = thresholds.max_insert_or_replace_chars
    if stats.max_insert_chars >= limit or stats.max_replace_chars >= limit:
        return ConversionResult(None, VERDICT_REJECTED, REJECT_OVER_EDIT)

    deletions = merge_adjacent_deletions(original, extract_deletions(script))
    has_other_edits = any(op.tag in (EditTag.INSERT, EditTag.REPLACE)
                          for op in script.ops)
    if not deletions and not has_other_edits:
        return ConversionResult(KEEP_ALL_PROGRAM, VERDICT_ACCEPTED)
    if stats.total_deleted_chars < thresholds.min_deleted_chars:
        return ConversionResult(None, VERDICT_REJECTED, REJECT_TOO_SMALL)

    doc = LineIndexedDoc.from_text(original)
    try:
        calls = map_deletions_to_calls(doc, deletions)
    except AmbiguousMappingError:
        return ConversionResult(None, VERDICT_REJECTED, REJECT_AMBIGUOUS)

    program = RefineProgram.from_calls(calls)
    executed, report = execute_program(doc, program)
    if report.skipped or executed != apply_deletions(original, deletions):
        return ConversionResult(None, VERDICT_REJECTED, REJECT_AMBIGUOUS)
    return ConversionResult(program, VERDICT_ACCEPTED)


def make_example(doc_id: str, chunk_index: int, chunk_text: str,
                 result: ConversionResult) -> DistillExample:
    return DistillExample(
        doc_id=doc_id,
        chunk_index=chunk_index,
        chunk_text=chunk_text,
        program_text=result.program.source_text if result.program else "",
        verdict=result.verdict,
        reason=result.reason,
    )


def emit_training_records(examples: Iterable[DistillExample], sink: IO[str],
                          reject_sink: IO[str] | None = None) -> int:
    """Write accepted examples as training JSONL; route rejects to the log."""
    written = 0
    for ex in examples:
        if ex.accepted:
            record = {"doc_id": ex.doc_id, "chunk_index": ex.chunk_index,
                      "input": ex.chunk_text, "output": ex.program_text}
            sink.write(json.dumps(record, ensure_ascii=False) + "\n")
            written += 1
        elif reject_sink is not None:
            record = {"doc_id": ex.doc_id, "chunk_index": ex.chunk_index,
                      "reason": ex.reason}
            reject_sink.write(json.dumps(record, ensure_ascii=False) + "\n")
    return written
