"""Exception hierarchy.

Every error carries a short ``category`` used by the CLI to print a
categorized failure line.
"""

from __future__ import annotations


class AbsaError(Exception):
    category = "error"


class CodecInputError(AbsaError, ValueError):
    """Index outside ``[1, n + l]`` handed to the codec."""

    category = "input-format"


class ParseError(AbsaError, ValueError):
    category = "parse"

    def __init__(self, message: str, line_number: int | None = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class ValidationError(ParseError):
    category = "validation"


class SampleError(AbsaError):
    category = "sample"


class ManipulationImpossible(AbsaError):
    category = "manipulation"


class TemplateError(AbsaError, ValueError):
    category = "template"


class AssemblyError(AbsaError, ValueError):
    category = "assembly"


class ShapeError(AbsaError, ValueError):
    category = "shape"


class AlignmentError(AbsaError, ValueError):
    category = "alignment"


class TrainingDiverged(AbsaError, RuntimeError):
    category = "training"

    def __init__(self, message: str, snapshot: dict | None = None):
        self.snapshot = snapshot or {}
        super().__init__(message)


class CheckpointError(AbsaError, FileNotFoundError):
    category = "checkpoint"
