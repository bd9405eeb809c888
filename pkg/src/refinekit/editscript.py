"""Character-level edit scripts between an original text and its refined version.

Two modes are offered:

* ``exact-dp``: classic dynamic-programming alignment.  The script cost is
  the true Levenshtein distance.  Quadratic memory, so input size is capped.
* ``hierarchical``: line-level diff first, exact DP (or a character-level
  sequence matcher for very large blocks) inside changed line groups.
  Always produces a valid script, but minimality is not guaranteed.
"""
from __future__ import annotations

import difflib
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

#: Cell budget for the exact DP table (|source| * |target|).
MAX_EXACT_CELLS = 4_000_000

EXACT_DP = "exact-dp"
HIERARCHICAL = "hierarchical"
AUTO = "auto"


class EditScriptError(ValueError):
    pass


class SizeLimitExceeded(EditScriptError):
    """exact-dp requested on an input pair above MAX_EXACT_CELLS."""


class InvalidUnicodeError(EditScriptError):
    """Input contains unpaired surrogates."""


class LengthMismatchError(EditScriptError):
    """Script src_len does not match the source it is applied to."""


class EditTag(Enum):
    EQUAL = "equal"
    DELETE = "delete"
    INSERT = "insert"
    REPLACE = "replace"


@dataclass(frozen=True)
class EditOp:
    """One span-level operation: source[i1:i2] -> target[j1:j2].

    ``text`` carries the target-side payload for INSERT and REPLACE so that
    a script can be applied without keeping the target string around.
    """

    tag: EditTag
    i1: int
    i2: int
    j1: int
    j2: int
    text: str = ""


@dataclass(frozen=True)
class EditScript:
    ops: tuple[EditOp, ...]
    src_len: int
    dst_len: int

    @property
    def cost(self) -> int:
        """Edited characters, 1 per character.  Equals Levenshtein distance
        in exact-dp mode."""
        total = 0
        for op in self.ops:
            if op.tag is EditTag.DELETE:
                total += op.i2 - op.i1
            elif op.tag is EditTag.INSERT:
                total += op.j2 - op.j1
            elif op.tag is EditTag.REPLACE:
                total += max(op.i2 - op.i1, op.j2 - op.j1)
        return total


@dataclass(frozen=True)
class SpanStats:
    max_insert_chars: int
    max_replace_chars: int
    total_deleted_chars: int


# Op codes used in the DP backtrack matrix.
_MATCH, _REPLACE, _DELETE, _INSERT = 0, 1, 2, 3


@njit(cache=True)
def _dp_fill(src, dst, dp, op):
    """Fill the Levenshtein DP and backtrack tables.

    Tie-breaking is fixed (match/replace beat delete, delete beats insert,
    strict improvement only) so identical inputs yield identical scripts.
    """
    m, n = len(src), len(dst)
    dp[0, 0] = 0
    op[0, 0] = _MATCH
    for i in range(1, m + 1):
        dp[i, 0] = i
        op[i, 0] = _DELETE
    for j in range(1, n + 1):
        dp[0, j] = j
        op[0, j] = _INSERT
    for i in range(1, m + 1):
        si = src[i - 1]
        for j in range(1, n + 1):
            if si == dst[j - 1]:
                best = dp[i - 1, j - 1]
                o = _MATCH
            else:
                best = dp[i - 1, j - 1] + 1
                o = _REPLACE
            if dp[i - 1, j] + 1 < best:
                best = dp[i - 1, j] + 1
                o = _DELETE
            if dp[i, j - 1] + 1 < best:
                best = dp[i, j - 1] + 1
                o = _INSERT
            dp[i, j] = best
            op[i, j] = o
    return dp[m, n]


def _encode(s: str) -> np.ndarray:
    return np.fromiter((ord(c) for c in s), dtype=np.int32, count=len(s))


def _check_unicode(*texts: str) -> None:
    for t in texts:
        try:
            t.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise InvalidUnicodeError(f"input is not valid Unicode: {exc}") from None


def _coalesce(ops: list[EditOp]) -> tuple[EditOp, ...]:
    """Merge adjacent same-tag ops into maximal runs."""
    out: list[EditOp] = []
    for op in ops:
        if op.i1 == op.i2 and op.j1 == op.j2:
            continue
        if out and out[-1].tag is op.tag:
            prev = out[-1]
            out[-1] = EditOp(op.tag, prev.i1, op.i2, prev.j1, op.j2, prev.text + op.text)
        else:
            out.append(op)
    return tuple(out)


def _exact_ops(source: str, target: str) -> list[EditOp]:
    m, n = len(source), len(target)
    dp = np.empty((m + 1, n + 1), dtype=np.int32)
    op = np.empty((m + 1, n + 1), dtype=np.int8)
    _dp_fill(_encode(source), _encode(target), dp, op)

    steps: list[int] = []
    i, j = m, n
    while i > 0 or j > 0:
        o = int(op[i, j])
        steps.append(o)
        if o <= _REPLACE:
            i -= 1
            j -= 1
        elif o == _DELETE:
            i -= 1
        else:
            j -= 1
    steps.reverse()

    ops: list[EditOp] = []
    si = sj = 0
    k = 0
    while k < len(steps):
        o = steps[k]
        k2 = k
        while k2 < len(steps) and steps[k2] == o:
            k2 += 1
        run = k2 - k
        if o == _MATCH:
            ops.append(EditOp(EditTag.EQUAL, si, si + run, sj, sj + run))
            si += run
            sj += run
        elif o == _REPLACE:
            ops.append(EditOp(EditTag.REPLACE, si, si + run, sj, sj + run,
                              target[sj:sj + run]))
            si += run
            sj += run
        elif o == _DELETE:
            ops.append(EditOp(EditTag.DELETE, si, si + run, sj, sj))
            si += run
        else:
            ops.append(EditOp(EditTag.INSERT, si, si, sj, sj + run,
                              target[sj:sj + run]))
            sj += run
        k = k2
    return ops


def _matcher_char_ops(source: str, target: str, si: int, sj: int) -> list[EditOp]:
    """Character-level diff via difflib for blocks too large for exact DP."""
    sm = difflib.SequenceMatcher(None, source, target, autojunk=False)
    ops = []
    for tag, a1, a2, b1, b2 in sm.get_opcodes():
        ops.append(_op_from_difflib(tag, si + a1, si + a2, sj + b1, sj + b2,
                                    target[b1:b2]))
    return ops


def _op_from_difflib(tag: str, i1: int, i2: int, j1: int, j2: int, payload: str) -> EditOp:
    if tag == "equal":
        return EditOp(EditTag.EQUAL, i1, i2, j1, j2)
    if tag == "delete":
        return EditOp(EditTag.DELETE, i1, i2, j1, j1)
    if tag == "insert":
        return EditOp(EditTag.INSERT, i1, i1, j1, j2, payload)
    return EditOp(EditTag.REPLACE, i1, i2, j1, j2, payload)


def _hierarchical_ops(source: str, target: str) -> list[EditOp]:
    a = source.splitlines(keepends=True)
    b = target.splitlines(keepends=True)
    ao = [0]
    for line in a:
        ao.append(ao[-1] + len(line))
    bo = [0]
    for line in b:
        bo.append(bo[-1] + len(line))

    sm = difflib.SequenceMatcher(None, a, b, autojunk=False)
    ops: list[EditOp] = []
    for tag, a1, a2, b1, b2 in sm.get_opcodes():
        ca1, ca2 = ao[a1], ao[a2]
        cb1, cb2 = bo[b1], bo[b2]
        if tag == "replace":
            seg_s = source[ca1:ca2]
            seg_t = target[cb1:cb2]
            if len(seg_s) * len(seg_t) <= MAX_EXACT_CELLS:
                for op in _exact_ops(seg_s, seg_t):
                    ops.append(EditOp(op.tag, op.i1 + ca1, op.i2 + ca1,
                                      op.j1 + cb1, op.j2 + cb1, op.text))
            else:
                ops.extend(_matcher_char_ops(seg_s, seg_t, ca1, cb1))
        else:
            ops.append(_op_from_difflib(tag, ca1, ca2, cb1, cb2, target[cb1:cb2]))
    return ops


def compute_edit_script(source: str, target: str, mode: str = AUTO) -> EditScript:
    """Align ``source`` to ``target`` as a span-level edit script.

    ``auto`` picks exact-dp when the pair fits the cell budget and falls
    back to hierarchical otherwise.
    """
    _check_unicode(source, target)
    if mode == AUTO:
        mode = EXACT_DP if len(source) * len(target) <= MAX_EXACT_CELLS else HIERARCHICAL
    if mode == EXACT_DP:
        if len(source) * len(target) > MAX_EXACT_CELLS:
            raise SizeLimitExceeded(
                f"exact-dp needs {len(source)}*{len(target)} cells, "
                f"limit is {MAX_EXACT_CELLS}")
        ops = _exact_ops(source, target)
    elif mode == HIERARCHICAL:
        ops = _hierarchical_ops(source, target)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return EditScript(_coalesce(ops), len(source), len(target))


def apply_edit_script(source: str, script: EditScript) -> str:
    """Replay a script against its source; the test oracle for validity."""
    if len(source) != script.src_len:
        raise LengthMismatchError(
            f"script built for length {script.src_len}, got {len(source)}")
    parts = []
    for op in script.ops:
        if op.tag is EditTag.EQUAL:
            parts.append(source[op.i1:op.i2])
        elif op.tag is not EditTag.DELETE:
            parts.append(op.text)
    return "".join(parts)


def extract_deletions(script: EditScript) -> list[tuple[int, int]]:
    """Source character ranges removed by the script, ascending."""
    return [(op.i1, op.i2) for op in script.ops if op.tag is EditTag.DELETE]


def apply_deletions(source: str, deletions: list[tuple[int, int]]) -> str:
    """Drop the given (ascending, non-overlapping) source ranges."""
    parts = []
    pos = 0
    for a, b in deletions:
        parts.append(source[pos:a])
        pos = b
    parts.append(source[pos:])
    return "".join(parts)


def span_stats(script: EditScript) -> SpanStats:
    max_ins = 0
    max_rep = 0
    deleted = 0
    for op in script.ops:
        if op.tag is EditTag.INSERT:
            max_ins = max(max_ins, op.j2 - op.j1)
        elif op.tag is EditTag.REPLACE:
            max_rep = max(max_rep, op.j2 - op.j1)
        elif op.tag is EditTag.DELETE:
            deleted += op.i2 - op.i1
    return SpanStats(max_ins, max_rep, deleted)
