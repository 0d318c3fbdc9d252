"""Prompt-tuned pointer-network generation for aspect sentiment triplet extraction."""

from .core import (
    AnnotatedSentence,
    Polarity,
    SequenceDiagnostics,
    Span,
    SubtaskKind,
    TargetSequence,
    Triplet,
    decode_sequence,
    encode_targets,
    round_trip_check,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "Polarity",
    "SequenceDiagnostics",
    "Span",
    "SubtaskKind",
    "TargetSequence",
    "Triplet",
    "decode_sequence",
    "encode_targets",
    "round_trip_check",
]
