"""Deletion-only refinement program language: parsing, serialization, execution.

A program is one call per line in the wire format::

    remove_lines(3, 5)
    remove_str(7, "BUY NOW")
    keep_all()

All line indices are 1-based and refer to the *original* document.  Execution
marks deletions first and materializes the output once, so results are
independent of call order.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

# skip reasons recorded by the executor
SKIP_AMBIGUOUS = "ambiguous-substring"
SKIP_NOT_FOUND = "not-found"
SKIP_OUT_OF_RANGE = "line-out-of-range"
SKIP_SHADOWED = "shadowed-by-line-removal"


class ProgramError(Exception):
    pass


class ProgramParseError(ProgramError):
    def __init__(self, reason: str, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message} [{reason}]")
        self.reason = reason
        self.line_no = line_no


@dataclass(frozen=True)
class RemoveLines:
    start_line: int
    end_line: int

    def __post_init__(self):
        if not (1 <= self.start_line <= self.end_line):
            raise ValueError(
                f"invalid line range ({self.start_line}, {self.end_line})")


@dataclass(frozen=True)
class RemoveStr:
    line: int
    del_str: str

    def __post_init__(self):
        if self.line < 1:
            raise ValueError(f"invalid line {self.line}")
        if not self.del_str:
            raise ValueError("del_str must be non-empty")
        if "\n" in self.del_str:
            raise ValueError("del_str must not contain newlines")


@dataclass(frozen=True)
class KeepAll:
    pass


Call = Union[RemoveLines, RemoveStr, KeepAll]


def serialize_call(call: Call) -> str:
    if isinstance(call, KeepAll):
        return "keep_all()"
    if isinstance(call, RemoveLines):
        return f"remove_lines({call.start_line}, {call.end_line})"
    return f'remove_str({call.line}, "{_escape(call.del_str)}")'


def _escape(s: str) -> str:
    return (s.replace("\\", "\\\\").replace('"', '\\"')
             .replace("\n", "\\n").replace("\t", "\\t"))


@dataclass(frozen=True)
class RefineProgram:
    """Ordered calls plus their canonical wire form.

    An empty call list is the in-memory identity program (produced e.g. by
    merging all-keep_all chunks); it serializes to ``keep_all()``.
    """

    calls: tuple[Call, ...]
    source_text: str

    def __post_init__(self):
        if any(isinstance(c, KeepAll) for c in self.calls) and len(self.calls) > 1:
            raise ValueError("keep_all() cannot be combined with other calls")

    @classmethod
    def from_calls(cls, calls) -> "RefineProgram":
        calls = tuple(calls)
        return cls(calls, _serialize(calls))

    @property
    def is_identity(self) -> bool:
        return not self.calls or isinstance(self.calls[0], KeepAll)

    def serialize(self) -> str:
        return _serialize(self.calls)


KEEP_ALL_PROGRAM = RefineProgram((KeepAll(),), "keep_all()")


def _serialize(calls: tuple[Call, ...]) -> str:
    if not calls:
        return "keep_all()"
    return "\n".join(serialize_call(c) for c in calls)


def serialize_program(program: RefineProgram) -> str:
    return _serialize(program.calls)


class _CallScanner:
    """Hand-rolled scanner for one call; whitespace tolerant."""

    def __init__(self, text: str, line_no: int):
        self.text = text
        self.pos = 0
        self.line_no = line_no

    def error(self, reason: str, message: str):
        raise ProgramParseError(reason, self.line_no, message)

    def skip_ws(self):
        while self.pos < len(self.text) and self.text[self.pos] in " \t\r":
            self.pos += 1

    def expect(self, ch: str):
        self.skip_ws()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            self.error("malformed-call", f"expected {ch!r}")
        self.pos += 1

    def name(self) -> str:
        self.skip_ws()
        start = self.pos
        while self.pos < len(self.text) and (self.text[self.pos].isalnum()
                                             or self.text[self.pos] == "_"):
            self.pos += 1
        if start == self.pos:
            self.error("malformed-call", "expected function name")
        return self.text[start:self.pos]

    def args(self) -> list:
        self.expect("(")
        out = []
        self.skip_ws()
        if self.pos < len(self.text) and self.text[self.pos] == ")":
            self.pos += 1
            return out
        while True:
            out.append(self.value())
            self.skip_ws()
            if self.pos >= len(self.text):
                self.error("malformed-call", "unclosed call")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == ")":
                break
            if ch != ",":
                self.error("malformed-call", f"expected ',' or ')', got {ch!r}")
        self.skip_ws()
        if self.pos != len(self.text):
            self.error("malformed-call", "trailing characters after call")
        return out

    def value(self):
        self.skip_ws()
        if self.pos >= len(self.text):
            self.error("malformed-call", "missing argument")
        if self.text[self.pos] == '"':
            return self.string()
        return self.integer()

    def integer(self) -> int:
        start = self.pos
        if self.pos < len(self.text) and self.text[self.pos] == "-":
            self.pos += 1
        while self.pos < len(self.text) and self.text[self.pos].isdigit():
            self.pos += 1
        token = self.text[start:self.pos]
        try:
            return int(token)
        except ValueError:
            self.error("non-integer-argument", f"expected integer, got {token!r}")

    def string(self) -> str:
        self.pos += 1  # opening quote
        out = []
        while True:
            if self.pos >= len(self.text):
                self.error("unterminated-string", "unterminated string literal")
            ch = self.text[self.pos]
            self.pos += 1
            if ch == '"':
                # a closing quote must be followed by ',' or ')'; anything
                # else means the quote did not actually terminate the literal
                save = self.pos
                self.skip_ws()
                if self.pos < len(self.text) and self.text[self.pos] not in ",)":
                    self.error("unterminated-string",
                               "text after closing quote inside string")
                self.pos = save
                return "".join(out)
            if ch == "\\":
                if self.pos >= len(self.text):
                    self.error("unterminated-string", "dangling escape")
                esc = self.text[self.pos]
                self.pos += 1
                mapped = {'"': '"', "\\": "\\", "n": "\n", "t": "\t"}.get(esc)
                if mapped is None:
                    self.error("unterminated-string", f"bad escape \\{esc}")
                out.append(mapped)
            else:
                out.append(ch)


_ARITIES = {"remove_lines": 2, "remove_str": 2, "keep_all": 0}


def _parse_call(line: str, line_no: int) -> Call:
    sc = _CallScanner(line, line_no)
    name = sc.name()
    if name not in _ARITIES:
        sc.error("unknown-function", f"unknown function {name!r}")
    args = sc.args()
    if len(args) != _ARITIES[name]:
        sc.error("arity-error",
                 f"{name} takes {_ARITIES[name]} arguments, got {len(args)}")
    try:
        if name == "keep_all":
            return KeepAll()
        if name == "remove_lines":
            if not all(isinstance(a, int) for a in args):
                sc.error("non-integer-argument", "remove_lines takes two integers")
            return RemoveLines(args[0], args[1])
        if not isinstance(args[0], int):
            sc.error("non-integer-argument", "remove_str line must be an integer")
        if not isinstance(args[1], str):
            sc.error("non-integer-argument", "remove_str del_str must be a string")
        return RemoveStr(args[0], args[1])
    except ValueError as exc:
        sc.error("invalid-argument", str(exc))


def parse_program(text: str) -> RefineProgram:
    """Parse the wire format: one call per line, blank lines ignored."""
    calls = []
    for line_no, line in enumerate(text.split("\n"), start=1):
        if not line.strip():
            continue
        calls.append(_parse_call(line, line_no))
    if not calls:
        raise ProgramParseError("empty-program", 1, "program has no calls")
    keep = sum(isinstance(c, KeepAll) for c in calls)
    if keep and len(calls) > 1:
        raise ProgramParseError("keep_all-mixed-with-other-calls", 1,
                                "keep_all() must be the only call")
    return RefineProgram.from_calls(calls)


@dataclass(frozen=True)
class LineIndexedDoc:
    """A document with per-line content spans into ``text``.

    Lines are split on ``\\n``; span (s, e) covers the line content only,
    never the separator.
    """

    text: str
    lines: tuple[str, ...]
    spans: tuple[tuple[int, int], ...]

    @classmethod
    def from_text(cls, text: str) -> "LineIndexedDoc":
        lines = text.split("\n")
        spans = []
        pos = 0
        for line in lines:
            spans.append((pos, pos + len(line)))
            pos += len(line) + 1
        return cls(text, tuple(lines), tuple(spans))


@dataclass(frozen=True)
class ExecutionReport:
    applied: int
    skipped: tuple[tuple[Call, str], ...]
    output_empty: bool
    untouched: bool
    removed_line_count: int
    all_lines_removed: bool


def count_occurrences(line: str, sub: str) -> int:
    """Occurrence count including overlapping matches; str.count would
    report 1 for "aa" in "aaa" and let ambiguous deletions slip through."""
    count = 0
    pos = line.find(sub)
    while pos >= 0:
        count += 1
        if count > 1:
            break
        pos = line.find(sub, pos + 1)
    return count


def _line_run_intervals(doc: LineIndexedDoc, removed: set[int]) -> list[tuple[int, int]]:
    """Character intervals deleted by whole-line removal.

    Each maximal run of removed lines takes its trailing newline; a run
    ending at the final line takes the newline before the run instead, so
    no stray blank line is left behind.
    """
    n = len(doc.lines)
    intervals = []
    runs = []
    for idx in sorted(removed):
        if runs and runs[-1][1] == idx - 1:
            runs[-1][1] = idx
        else:
            runs.append([idx, idx])
    for a, b in runs:
        start = doc.spans[a][0]
        end = doc.spans[b][1]
        if b < n - 1:
            end += 1  # trailing separator
        elif a > 0:
            start -= 1  # separator before the run
        intervals.append((start, end))
    return intervals


def execute_program(doc: LineIndexedDoc,
                    program: RefineProgram) -> tuple[str, ExecutionReport]:
    """Apply a program; never raises on bad calls, records skips instead."""
    n = len(doc.lines)
    removed_lines: set[int] = set()
    skipped: list[tuple[Call, str]] = []
    applied = 0

    for call in program.calls:
        if isinstance(call, RemoveLines):
            if call.start_line < 1 or call.end_line > n:
                skipped.append((call, SKIP_OUT_OF_RANGE))
            else:
                removed_lines.update(range(call.start_line - 1, call.end_line))
                applied += 1

    str_intervals: list[tuple[int, int]] = []
    for call in program.calls:
        if isinstance(call, KeepAll):
            applied += 1
        elif isinstance(call, RemoveStr):
            idx = call.line - 1
            if idx < 0 or idx >= n:
                skipped.append((call, SKIP_OUT_OF_RANGE))
                continue
            if idx in removed_lines:
                skipped.append((call, SKIP_SHADOWED))
                continue
            line = doc.lines[idx]
            count = count_occurrences(line, call.del_str)
            if count == 0:
                skipped.append((call, SKIP_NOT_FOUND))
            elif count > 1:
                skipped.append((call, SKIP_AMBIGUOUS))
            else:
                offset = line.index(call.del_str)
                start = doc.spans[idx][0] + offset
                str_intervals.append((start, start + len(call.del_str)))
                applied += 1

    intervals = sorted(_line_run_intervals(doc, removed_lines) + str_intervals)
    merged: list[list[int]] = []
    for a, b in intervals:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])

    if merged:
        parts = []
        pos = 0
        for a, b in merged:
            parts.append(doc.text[pos:a])
            pos = b
        parts.append(doc.text[pos:])
        refined = "".join(parts)
    else:
        refined = doc.text

    report = ExecutionReport(
        applied=applied,
        skipped=tuple(skipped),
        output_empty=not refined.strip(),
        untouched=refined == doc.text,
        removed_line_count=len(removed_lines),
        all_lines_removed=bool(removed_lines) and len(removed_lines) == n,
    )
    return refined, report


def offset_program(program: RefineProgram, line_offset: int) -> RefineProgram:
    """Shift every line index; used to map chunk-local programs back to
    whole-document coordinates."""
    if line_offset < 0:
        raise ValueError("line_offset must be >= 0")
    calls = []
    for call in program.calls:
        if isinstance(call, RemoveLines):
            calls.append(RemoveLines(call.start_line + line_offset,
                                     call.end_line + line_offset))
        elif isinstance(call, RemoveStr):
            calls.append(RemoveStr(call.line + line_offset, call.del_str))
        else:
            calls.append(call)
    return RefineProgram.from_calls(calls)
