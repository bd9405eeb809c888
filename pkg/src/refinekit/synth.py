"""Synthetic ground-truth harness: inject labeled noise, score recovery.

Desk-scale substitute for corpus-scale evaluation: every injected span is
recorded exactly, so a pipeline run can be scored against a known oracle.
Injected spans are kept >= 10 characters and unique within their line so
that clean corpora survive the distillation filters by construction.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field

from .editscript import compute_edit_script, extract_deletions
from .program import (Call, LineIndexedDoc, RefineProgram, RemoveLines,
                      RemoveStr, execute_program)

NOISE_KINDS = ("ad-line", "nav-header", "url-line", "inline-url",
               "gibberish-line", "inline-gibberish")
_LINE_KINDS = ("ad-line", "nav-header", "url-line", "gibberish-line")
_INLINE_KINDS = ("inline-url", "inline-gibberish")

# Original filler prose; enough variety that lines rarely repeat.
_SENTENCES = (
    "Rivers carry sediment from the mountains down to the coastal plains.",
    "The committee reviewed the proposal and requested two more revisions.",
    "Glass is produced by melting sand together with soda ash and limestone.",
    "Migratory birds navigate using the position of the sun and the stars.",
    "The museum's east wing houses a collection of early printing presses.",
    "Farmers rotate their crops to keep the soil from losing its nutrients.",
    "A suspension bridge distributes its load through cables and towers.",
    "The observatory recorded an unusually bright meteor shower that night.",
    "Local markets open before dawn during the harvest season each year.",
    "Volcanic soil is often fertile because of its high mineral content.",
    "The library digitized thousands of manuscripts over the past decade.",
    "Ocean currents moderate the climate of many coastal regions.",
    "Engineers tested the prototype under a wide range of temperatures.",
    "The old mill by the river was converted into a community workshop.",
    "Honeybees communicate the location of food through a waggle dance.",
    "The expedition mapped the cave system across three summers.",
    "Rail freight remains the cheapest way to move bulk goods inland.",
    "The orchard produces apples, pears, and a small crop of quinces.",
    "Astronomers measure stellar distances using parallax observations.",
    "The council approved funding for a new water treatment facility.",
    "Clockmakers once apprenticed for seven years before opening a shop.",
    "Lichens grow slowly but can survive in extremely harsh environments.",
    "The ferry crossing takes forty minutes in calm weather.",
    "Typesetters kept their most frequently used letters within easy reach.",
    "Granite quarried nearby gave the old courthouse its pale grey facade.",
    "The lighthouse keeper logged every passing vessel in a leather ledger.",
    "Cartographers revised the coastal charts after the winter storms.",
    "A narrow canal once linked the foundry to the harbor warehouses.",
    "The botanical garden labels each specimen with its region of origin.",
    "Surveyors drove iron stakes along the proposed railway embankment.",
    "The printing guild standardized paper sizes across the province.",
    "Glaciers carved the valley into its characteristic U-shaped profile.",
    "The apiary sits behind a windbreak of closely planted poplars.",
    "Millers adjusted the grindstones according to the grain's moisture.",
    "The archive stores wax cylinder recordings in a climate-controlled vault.",
    "Terraced fields follow the contour lines of the steep hillside.",
    "Volunteers restored the brass telescope over two winters.",
    "Coopers shaped barrel staves over an open bed of glowing coals.",
    "The tramway climbs the escarpment through a series of switchbacks.",
    "Seed banks preserve genetic diversity against future crop failures.",
)

_AD_TEMPLATES = (
    "BUY NOW and save big at megadeals-{id}.example.com limited stock!!!",
    "*** SPECIAL OFFER {id} *** click here for incredible discounts ***",
    "Sponsored: win a free cruise today, enter code {id} at checkout now",
)
_NAV_TEMPLATES = (
    "Home | About | Products | Contact | Login | Register | Sitemap {id}",
    "Menu: News {id} / Archive / Tags / RSS / Newsletter / Privacy Policy",
)
_URL_TEMPLATES = (
    "http://tracker-{id}.example.org/click?campaign=spring&uid={id}",
    "https://ads-{id}.example.net/banner/{id}/impression.gif",
)
_GIBBERISH_ALPHABET = "qwxzkjv0123456789#@%&"


@dataclass(frozen=True)
class NoiseSpec:
    """Expected injections per document, by kind, plus the RNG seed."""

    rates: dict[str, float] = field(default_factory=dict)
    seed: int = 0
    lines_per_doc: tuple[int, int] = (8, 16)

    def __post_init__(self):
        for kind in self.rates:
            if kind not in NOISE_KINDS:
                raise ValueError(f"unknown noise kind {kind!r}")


@dataclass(frozen=True)
class LabeledDoc:
    doc_id: str
    clean_text: str
    noisy_text: str
    # (start, end, kind) character ranges in noisy_text, disjoint, ascending
    injected_spans: tuple[tuple[int, int, str], ...]
    # 0-based indices of fully injected lines in noisy_text
    injected_lines: tuple[int, ...]
    # (0-based line index, substring) for inline injections
    inline_injections: tuple[tuple[int, str], ...]
    oracle_refined: str

    def to_dict(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "clean_text": self.clean_text,
            "noisy_text": self.noisy_text,
            "injected_spans": [list(s) for s in self.injected_spans],
            "injected_lines": list(self.injected_lines),
            "inline_injections": [list(p) for p in self.inline_injections],
            "oracle_refined": self.oracle_refined,
        }


def _gibberish(rng: random.Random, length: int) -> str:
    return "".join(rng.choice(_GIBBERISH_ALPHABET) for _ in range(length))


def _noise_line(kind: str, rng: random.Random) -> str:
    uid = f"{rng.randrange(100000, 999999)}"
    if kind == "ad-line":
        return rng.choice(_AD_TEMPLATES).format(id=uid)
    if kind == "nav-header":
        return rng.choice(_NAV_TEMPLATES).format(id=uid)
    if kind == "url-line":
        return rng.choice(_URL_TEMPLATES).format(id=uid)
    return _gibberish(rng, rng.randrange(20, 40)) + uid


def _inline_span(kind: str, rng: random.Random) -> str:
    uid = f"{rng.randrange(100000, 999999)}"
    if kind == "inline-url":
        return f" http://spam-{uid}.example.com/redirect"
    return " " + _gibberish(rng, 8) + uid


def _count_for_rate(rate: float, rng: random.Random) -> int:
    base = int(rate)
    return base + (1 if rng.random() < rate - base else 0)


def generate_doc(spec: NoiseSpec, doc_index: int) -> LabeledDoc:
    rng = random.Random(spec.seed * 1_000_003 + doc_index)
    lo, hi = spec.lines_per_doc
    n_clean = rng.randrange(lo, hi + 1)
    # sentences are consumed without replacement so every clean line is
    # unique within the doc; duplicate identical lines would make the
    # line-level diff anchoring (and hence closure) ambiguous
    pool = rng.sample(_SENTENCES, len(_SENTENCES))
    clean_lines = []
    for _ in range(n_clean):
        k = rng.choice((1, 1, 2))
        k = min(k, len(pool))
        clean_lines.append(" ".join(pool.pop() for _ in range(k)))
    clean_text = "\n".join(clean_lines)

    # assemble as (line, injected_kind or None); inline injections recorded
    # as (slot index, substring) and spliced afterwards
    slots: list[list] = [[line, None] for line in clean_lines]
    inline_by_slot: dict[int, tuple[str, str]] = {}

    for kind in _LINE_KINDS:
        rate = spec.rates.get(kind, 0.0)
        for _ in range(_count_for_rate(rate, rng)):
            # inserting before an existing slot keeps the original final
            # clean line last, so every injected line owns its trailing
            # separator
            pos = rng.randrange(0, len(slots))
            slots.insert(pos, [_noise_line(kind, rng), kind])

    candidates = [i for i, (_, kind) in enumerate(slots) if kind is None]
    for kind in _INLINE_KINDS:
        rate = spec.rates.get(kind, 0.0)
        for _ in range(_count_for_rate(rate, rng)):
            free = [i for i in candidates if i not in inline_by_slot]
            if not free:
                break
            slot = rng.choice(free)
            inline_by_slot[slot] = (kind, _inline_span(kind, rng))

    noisy_lines = []
    injected_lines = []
    inline_injections = []
    line_meta = []  # (kind or None, inline (kind, substring, offset) or None)
    for i, (line, kind) in enumerate(slots):
        inline = None
        if i in inline_by_slot:
            ikind, span = inline_by_slot[i]
            cut = line.rfind(" ", 0, len(line) // 2 + 1)
            cut = cut if cut > 0 else len(line)
            line = line[:cut] + span + line[cut:]
            inline = (ikind, span, cut)
        if kind is not None:
            injected_lines.append(len(noisy_lines))
        if inline is not None:
            inline_injections.append((len(noisy_lines), inline[1]))
        line_meta.append((kind, inline))
        noisy_lines.append(line)

    noisy_text = "\n".join(noisy_lines)
    doc = LineIndexedDoc.from_text(noisy_text)

    spans = []
    for idx, (kind, inline) in enumerate(line_meta):
        s, e = doc.spans[idx]
        if kind is not None:
            # injected lines are never document-final by construction
            spans.append((s, e + 1, kind))
        elif inline is not None:
            ikind, span, cut = inline
            spans.append((s + cut, s + cut + len(span), ikind))
    spans.sort()

    oracle = _delete_spans(noisy_text, spans)
    return LabeledDoc(
        doc_id=f"synth-{spec.seed}-{doc_index}",
        clean_text=clean_text,
        noisy_text=noisy_text,
        injected_spans=tuple(spans),
        injected_lines=tuple(injected_lines),
        inline_injections=tuple(inline_injections),
        oracle_refined=oracle,
    )


def _delete_spans(text: str, spans) -> str:
    parts = []
    pos = 0
    for a, b, _ in spans:
        parts.append(text[pos:a])
        pos = b
    parts.append(text[pos:])
    return "".join(parts)


def generate_corpus(spec: NoiseSpec, n_docs: int) -> list[LabeledDoc]:
    if n_docs < 1:
        raise ValueError("n_docs must be >= 1")
    return [generate_doc(spec, i) for i in range(n_docs)]


def oracle_program(doc: LabeledDoc) -> RefineProgram:
    """The whole-document ground-truth program for a labeled doc."""
    calls = _oracle_calls(doc.injected_lines, doc.inline_injections)
    return RefineProgram.from_calls(calls)


def _oracle_calls(injected_lines, inline_injections) -> list[Call]:
    calls: list[Call] = []
    run_start = None
    prev = None
    for idx in injected_lines:
        if run_start is None:
            run_start = prev = idx
        elif idx == prev + 1:
            prev = idx
        else:
            calls.append(RemoveLines(run_start + 1, prev + 1))
            run_start = prev = idx
    if run_start is not None:
        calls.append(RemoveLines(run_start + 1, prev + 1))
    for line_idx, sub in inline_injections:
        calls.append(RemoveStr(line_idx + 1, sub))
    return calls


def oracle_chunk_refinement(doc: LabeledDoc, line_offset: int,
                            chunk_text: str) -> str:
    """What a perfect expert would return for one chunk of a labeled doc."""
    local = LineIndexedDoc.from_text(chunk_text)
    n = len(local.lines)
    lines = [i - line_offset for i in doc.injected_lines
             if line_offset <= i < line_offset + n]
    inline = [(i - line_offset, sub) for i, sub in doc.inline_injections
              if line_offset <= i < line_offset + n]
    program = RefineProgram.from_calls(_oracle_calls(lines, inline))
    refined, _ = execute_program(local, program)
    return refined


def run_closure(spec: NoiseSpec, n_docs: int, window: int = 3000) -> dict:
    """Full-pipeline closure run against the oracle expert.

    generate -> per-chunk oracle refinement -> program distillation ->
    parse -> offset-merge -> execute, scored against the ground truth.
    """
    from .chunking import ChunkConfig, merge_chunk_programs, split_document
    from .distill import convert_to_program
    from .program import KEEP_ALL_PROGRAM, parse_program

    docs = generate_corpus(spec, n_docs)
    cfg = ChunkConfig(window=window)
    outputs = []
    attempted = accepted = 0
    rejected_by_reason: dict[str, int] = {}
    for doc in docs:
        lid = LineIndexedDoc.from_text(doc.noisy_text)
        chunks = split_document(lid, cfg)
        programs = []
        for chunk in chunks:
            if chunk.flagged_skipped:
                programs.append(KEEP_ALL_PROGRAM)
                continue
            refined_chunk = oracle_chunk_refinement(doc, chunk.line_offset,
                                                    chunk.text)
            result = convert_to_program(chunk.text, refined_chunk)
            attempted += 1
            if result.accepted:
                accepted += 1
                # round-trip through the wire format, as a real run would
                programs.append(parse_program(result.program.source_text))
            else:
                rejected_by_reason[result.reason] = (
                    rejected_by_reason.get(result.reason, 0) + 1)
                programs.append(KEEP_ALL_PROGRAM)
        merged, _ = merge_chunk_programs(chunks, programs)
        out, _ = execute_program(lid, merged)
        outputs.append(out)

    score = score_recovery(docs, outputs)
    summary = score.to_dict()
    summary.update({
        "pairs_attempted": attempted,
        "accepted": accepted,
        "rejected_by_reason": rejected_by_reason,
        "rejection_rate": (attempted - accepted) / attempted if attempted else 0.0,
    })
    return summary


@dataclass(frozen=True)
class RecoveryScore:
    span_precision: float
    span_recall: float
    exact_match_rate: float
    zero_deletions: bool
    doc_count: int

    def to_dict(self) -> dict:
        return {
            "doc_count": self.doc_count,
            "span_precision": self.span_precision,
            "span_recall": self.span_recall,
            "exact_match_rate": self.exact_match_rate,
            "zero_deletions": self.zero_deletions,
        }


def score_recovery(labeled: list[LabeledDoc],
                   refined: list[str]) -> RecoveryScore:
    """Score refined outputs against the injected-noise ground truth.

    A span counts as recovered when all of its characters were deleted and
    nothing outside the injected spans was touched.  Precision is measured
    over deleted characters; with no deletions at all it is reported as 1.0
    with the zero_deletions flag set.
    """
    if len(labeled) != len(refined):
        raise ValueError(f"{len(labeled)} labeled docs but {len(refined)} outputs")

    total_spans = 0
    recovered = 0
    deleted_chars = 0
    deleted_injected = 0
    exact = 0
    for doc, out in zip(labeled, refined):
        total_spans += len(doc.injected_spans)
        if out == doc.oracle_refined:
            exact += 1
            recovered += len(doc.injected_spans)
            injected_total = sum(b - a for a, b, _ in doc.injected_spans)
            deleted_chars += injected_total
            deleted_injected += injected_total
            continue
        if out == doc.noisy_text:
            continue
        script = compute_edit_script(doc.noisy_text, out)
        mask: set[int] = set()
        for a, b in extract_deletions(script):
            mask.update(range(a, b))
        injected_positions: set[int] = set()
        for a, b, _ in doc.injected_spans:
            injected_positions.update(range(a, b))
        deleted_chars += len(mask)
        deleted_injected += len(mask & injected_positions)
        clean_ok = mask <= injected_positions
        if clean_ok:
            for a, b, _ in doc.injected_spans:
                if all(p in mask for p in range(a, b)):
                    recovered += 1

    return RecoveryScore(
        span_precision=(deleted_injected / deleted_chars) if deleted_chars else 1.0,
        span_recall=(recovered / total_spans) if total_spans else 1.0,
        exact_match_rate=exact / len(labeled) if labeled else 1.0,
        zero_deletions=deleted_chars == 0,
        doc_count=len(labeled),
    )
