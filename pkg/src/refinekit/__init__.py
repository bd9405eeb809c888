"""refinekit: deletion-only corpus refinement.

Converts expert end-to-end text refinements into deletion-only edit
programs, filters them into training data, and executes such programs over
large text corpora with safety checks and evaluation metrics.
"""

from .editscript import (EditOp, EditScript, EditTag, SpanStats,
                         apply_edit_script, compute_edit_script,
                         extract_deletions, span_stats)
from .program import (ExecutionReport, KeepAll, LineIndexedDoc, RefineProgram,
                      RemoveLines, RemoveStr, execute_program, offset_program,
                      parse_program, serialize_program)
from .chunking import Chunk, ChunkConfig, merge_chunk_programs, split_document
from .distill import (ConversionResult, DistillExample, FilterThresholds,
                      convert_to_program, emit_training_records,
                      map_deletions_to_calls)
from .stats import RefineStats, compute_stats
from .synth import LabeledDoc, NoiseSpec, generate_corpus, score_recovery

__version__ = "0.1.0"

__all__ = [
    "EditOp", "EditScript", "EditTag", "SpanStats", "apply_edit_script",
    "compute_edit_script", "extract_deletions", "span_stats",
    "ExecutionReport", "KeepAll", "LineIndexedDoc", "RefineProgram",
    "RemoveLines", "RemoveStr", "execute_program", "offset_program",
    "parse_program", "serialize_program",
    "Chunk", "ChunkConfig", "merge_chunk_programs", "split_document",
    "ConversionResult", "DistillExample", "FilterThresholds",
    "convert_to_program", "emit_training_records", "map_deletions_to_calls",
    "RefineStats", "compute_stats",
    "LabeledDoc", "NoiseSpec", "generate_corpus", "score_recovery",
]
