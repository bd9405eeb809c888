"""Instance-level refinement statistics over (original, refined) pairs.

A "token" here is a whitespace word, keeping the metrics independent of any
model tokenizer.  Partials merge commutatively, so streams can be folded in
parallel and combined.
"""
from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Iterable


def _strip_punct(word: str) -> str:
    start, end = 0, len(word)
    while start < end and unicodedata.category(word[start]).startswith("P"):
        start += 1
    while end > start and unicodedata.category(word[end - 1]).startswith("P"):
        end -= 1
    return word[start:end]


def normalize_word(word: str) -> str:
    """Lowercased, leading/trailing punctuation stripped."""
    return _strip_punct(word).lower()


def word_set(text: str) -> set[str]:
    out = set()
    for w in text.split():
        norm = normalize_word(w)
        if norm:
            out.add(norm)
    return out


def _is_subsequence(needle: str, haystack: str) -> bool:
    it = iter(haystack)
    return all(ch in it for ch in needle)


def count_new_words(original: str, refined: str) -> int:
    """Count refined word types introduced relative to the original.

    A word counts as new only when its characters cannot be found in order
    in the original text.  Any deletion of characters (whole lines, whole
    words, or spans that splice word fragments together) therefore scores
    exactly 0, while genuinely introduced content is counted.
    """
    candidates = word_set(refined) - word_set(original)
    if not candidates:
        return 0
    haystack = original.lower()
    return sum(1 for w in candidates if not _is_subsequence(w, haystack))


@dataclass
class StatsPartial:
    doc_count: int = 0
    ratio_sum: float = 0.0
    ratio_count: int = 0
    untouched_count: int = 0
    empty_count: int = 0
    new_word_types: int = 0
    refined_word_total: int = 0

    def add(self, original: str, refined: str) -> None:
        self.doc_count += 1
        in_words = len(original.split())
        out_words = len(refined.split())
        if in_words > 0:
            self.ratio_sum += out_words / in_words
            self.ratio_count += 1
        if refined == original:
            self.untouched_count += 1
        if not refined.strip():
            self.empty_count += 1
        self.new_word_types += count_new_words(original, refined)
        self.refined_word_total += out_words

    def merge(self, other: "StatsPartial") -> "StatsPartial":
        self.doc_count += other.doc_count
        self.ratio_sum += other.ratio_sum
        self.ratio_count += other.ratio_count
        self.untouched_count += other.untouched_count
        self.empty_count += other.empty_count
        self.new_word_types += other.new_word_types
        self.refined_word_total += other.refined_word_total
        return self

    def finalize(self) -> "RefineStats":
        n = self.doc_count
        return RefineStats(
            token_ratio=(self.ratio_sum / self.ratio_count) if self.ratio_count else 0.0,
            untouched_pct=(100.0 * self.untouched_count / n) if n else 0.0,
            empty_pct=(100.0 * self.empty_count / n) if n else 0.0,
            new_words_per_1000=(1000.0 * self.new_word_types / self.refined_word_total)
            if self.refined_word_total else 0.0,
            doc_count=n,
        )


@dataclass(frozen=True)
class RefineStats:
    token_ratio: float
    untouched_pct: float
    empty_pct: float
    new_words_per_1000: float
    doc_count: int

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "token_ratio": self.token_ratio,
            "untouched_pct": self.untouched_pct,
            "empty_pct": self.empty_pct,
            "new_words_per_1000": self.new_words_per_1000,
        }


def compute_stats(pairs: Iterable[tuple[str, str]]) -> RefineStats:
    """Single streaming pass over (original, refined) pairs."""
    partial = StatsPartial()
    for original, refined in pairs:
        partial.add(original, refined)
    return partial.finalize()


def compute_stats_by_score(
    triples: Iterable[tuple[str, str, object]],
) -> dict[str, RefineStats]:
    """Group pairs by an externally supplied quality score.

    Pairs without a score land in the "unscored" bucket; an "all" bucket
    aggregates everything.
    """
    buckets: dict[str, StatsPartial] = {}
    overall = StatsPartial()
    for original, refined, score in triples:
        key = "unscored" if score is None else str(score)
        buckets.setdefault(key, StatsPartial()).add(original, refined)
        overall.add(original, refined)
    out = {key: p.finalize() for key, p in sorted(buckets.items())}
    out["all"] = overall.finalize()
    return out
