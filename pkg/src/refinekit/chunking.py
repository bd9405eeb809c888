"""Window-bounded document chunking and per-chunk program merging.

Length is measured in whitespace-delimited words as a cheap token proxy.
Chunks pack whole lines greedily; a single line longer than the window
becomes its own flagged chunk and is passed through unrefined.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .program import (Call, KeepAll, LineIndexedDoc, RefineProgram,
                      RemoveLines, RemoveStr)

INFERENCE_GREEDY = "inference-greedy"
TRAINING_OVERLAP = "training-overlap"

DROP_CONTEXT = "call-references-context-line"
DROP_OUT_OF_RANGE = "call-out-of-chunk-range"


def word_count(text: str) -> int:
    return len(text.split())


@dataclass(frozen=True)
class ChunkConfig:
    window: int = 3000
    mode: str = INFERENCE_GREEDY
    overlap_target: int | None = None  # defaults to 10% of window

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be positive")
        if self.mode not in (INFERENCE_GREEDY, TRAINING_OVERLAP):
            raise ValueError(f"unknown chunk mode {self.mode!r}")
        if self.overlap_target is not None and self.overlap_target >= self.window:
            raise ValueError("overlap_target must be smaller than window")

    @property
    def effective_overlap(self) -> int:
        if self.mode != TRAINING_OVERLAP:
            return 0
        if self.overlap_target is None:
            return self.window // 10
        return self.overlap_target


@dataclass(frozen=True)
class Chunk:
    index: int
    line_offset: int  # 0-based index of the chunk's first own line
    text: str
    flagged_skipped: bool = False
    context: str = ""  # trailing lines of the previous chunk (training mode)
    context_line_count: int = 0

    @property
    def full_text(self) -> str:
        if self.context_line_count:
            return self.context + "\n" + self.text
        return self.text

    @property
    def line_count(self) -> int:
        return self.text.count("\n") + 1


def split_document(doc: LineIndexedDoc, cfg: ChunkConfig) -> list[Chunk]:
    """Greedy line packing under the word-count window."""
    groups: list[tuple[int, list[str], bool]] = []  # (first line idx, lines, flagged)
    current: list[str] = []
    current_words = 0
    current_start = 0

    for idx, line in enumerate(doc.lines):
        words = word_count(line)
        if current and current_words + words <= cfg.window:
            current.append(line)
            current_words += words
            continue
        if current:
            groups.append((current_start, current, False))
            current = []
            current_words = 0
        if words > cfg.window:
            groups.append((idx, [line], True))
        else:
            current = [line]
            current_words = words
            current_start = idx
    if current:
        groups.append((current_start, current, False))

    chunks: list[Chunk] = []
    overlap = cfg.effective_overlap
    for index, (start, lines, flagged) in enumerate(groups):
        context_lines: list[str] = []
        if overlap and not flagged and index > 0:
            prev_start, prev_lines, prev_flagged = groups[index - 1]
            if not prev_flagged:
                taken = 0
                for line in reversed(prev_lines):
                    w = word_count(line)
                    if taken + w > overlap:
                        break
                    context_lines.insert(0, line)
                    taken += w
        chunks.append(Chunk(
            index=index,
            line_offset=start,
            text="\n".join(lines),
            flagged_skipped=flagged,
            context="\n".join(context_lines),
            context_line_count=len(context_lines),
        ))
    return chunks


def reassemble(chunks: list[Chunk]) -> str:
    """Inverse of split_document, ignoring training-mode context."""
    return "\n".join(c.text for c in chunks)


def merge_chunk_programs(
    chunks: list[Chunk],
    programs: list[RefineProgram],
) -> tuple[RefineProgram, list[tuple[int, Call, str]]]:
    """Offset chunk-local programs into whole-document coordinates.

    Line numbers in a chunk program are 1-based over the chunk's visible
    text (context lines first, in training mode).  Calls referencing
    context lines or lines outside the chunk are dropped and reported;
    flagged chunks and keep_all programs contribute nothing.
    """
    if len(chunks) != len(programs):
        raise ValueError(f"{len(chunks)} chunks but {len(programs)} programs")
    merged: list[Call] = []
    dropped: list[tuple[int, Call, str]] = []
    for chunk, program in zip(chunks, programs):
        if chunk.flagged_skipped:
            continue
        ctx = chunk.context_line_count
        last_local = ctx + chunk.line_count
        shift = chunk.line_offset - ctx
        for call in program.calls:
            if isinstance(call, KeepAll):
                continue
            if isinstance(call, RemoveLines):
                lo, hi = call.start_line, call.end_line
            else:
                lo = hi = call.line
            if lo <= ctx:
                dropped.append((chunk.index, call, DROP_CONTEXT))
                continue
            if hi > last_local:
                dropped.append((chunk.index, call, DROP_OUT_OF_RANGE))
                continue
            if isinstance(call, RemoveLines):
                merged.append(RemoveLines(lo + shift, hi + shift))
            else:
                merged.append(RemoveStr(lo + shift, call.del_str))
    return RefineProgram.from_calls(merged), dropped


def stitch_refined_chunks(results) -> str:
    """Concatenate per-chunk execution results back into one document.

    A chunk whose lines were all removed by remove_lines disappears along
    with its separator; a chunk merely emptied by remove_str keeps its
    (now empty) slot.
    """
    parts = []
    for text, report in results:
        if report.all_lines_removed:
            continue
        parts.append(text)
    return "\n".join(parts)
