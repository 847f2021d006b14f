"""Python bindings for the mhqa multi-hop question answering engine."""

from ._core import (
    AlignmentError,
    CorruptionError,
    Corpus,
    Error,
    ParseError,
    PrerequisiteError,
    Retriever,
    ValidationError,
    best_span,
    check_fold_hygiene,
    em_f1,
    hits_at_k,
    known_modes,
    load_corpus,
    normalize_answer,
    run_stage,
    split_folds,
    stage_names,
    tokenize,
)

__all__ = [
    "AlignmentError",
    "CorruptionError",
    "Corpus",
    "Error",
    "ParseError",
    "PrerequisiteError",
    "Retriever",
    "ValidationError",
    "best_span",
    "check_fold_hygiene",
    "em_f1",
    "hits_at_k",
    "known_modes",
    "load_corpus",
    "normalize_answer",
    "run_stage",
    "split_folds",
    "stage_names",
    "tokenize",
]
