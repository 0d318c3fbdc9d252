"""Exact-match scoring, the multi-triplet slice and invalid-generation rates."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Iterable, Mapping, Sequence

from .core import AnnotatedSentence, SequenceDiagnostics, SubtaskKind, TargetSequence, Triplet, decode_sequence, project
from .dataio import is_multi_triplet
from .errors import AlignmentError


@dataclass(frozen=True)
class Scores:
    precision: float
    recall: float
    f1: float
    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _from_counts(tp: int, n_pred: int, n_gold: int) -> Scores:
    p = tp / n_pred if n_pred else 0.0
    r = tp / n_gold if n_gold else 0.0
    # 2PR/(P+R) rewritten over counts; avoids a rounding step
    f1 = 2 * tp / (n_pred + n_gold) if tp else 0.0
    return Scores(p, r, f1, tp, n_pred, n_gold)


def _triplets_of(item) -> Iterable[Triplet]:
    return item.triplets if isinstance(item, AnnotatedSentence) else item


def _align(predictions, golds) -> list[tuple[object, object]]:
    if isinstance(predictions, Mapping) or isinstance(golds, Mapping):
        if not (isinstance(predictions, Mapping) and isinstance(golds, Mapping)):
            raise AlignmentError("predictions and golds must both be keyed by sentence id")
        if set(predictions) != set(golds):
            missing = set(golds) ^ set(predictions)
            raise AlignmentError(f"sentence ids differ: {sorted(missing, key=str)[:5]}")
        return [(predictions[k], golds[k]) for k in golds]
    predictions, golds = list(predictions), list(golds)
    if len(predictions) != len(golds):
        raise AlignmentError(f"{len(predictions)} predictions for {len(golds)} gold sentences")
    return list(zip(predictions, golds))


def _counts(pairs, subtask: SubtaskKind) -> tuple[int, int, int]:
    tp = n_pred = n_gold = 0
    for pred, gold in pairs:
        p = {project(t, subtask) for t in _triplets_of(pred)}
        g = {project(t, subtask) for t in _triplets_of(gold)}
        tp += len(p & g)
        n_pred += len(p)
        n_gold += len(g)
    return tp, n_pred, n_gold


def exact_match_scores(predictions, golds, subtask: SubtaskKind | str = SubtaskKind.TRIPLET) -> Scores:
    """Micro-averaged P/R/F1 with duplicates removed per sentence."""
    return _from_counts(*_counts(_align(predictions, golds), SubtaskKind.parse(subtask)))


@dataclass(frozen=True)
class SliceReport:
    scores: Scores
    n_sentences: int
    empty: bool


def multi_triplet_breakdown(predictions, golds: Sequence[AnnotatedSentence], subtask=SubtaskKind.TRIPLET) -> SliceReport:
    pairs = [(p, g) for p, g in _align(predictions, golds) if is_multi_triplet(g)]
    scores = _from_counts(*_counts(pairs, SubtaskKind.parse(subtask)))
    return SliceReport(scores, len(pairs), not pairs)


@dataclass(frozen=True)
class InvalidRates:
    err_length_rate: float
    err_order_rate: float
    total_groups: int
    per_sentence_length_rate: float = 0.0
    per_sentence_order_rate: float = 0.0
    empty: bool = False


def invalid_rates(
    raw_sequences: Sequence[TargetSequence],
    diagnostics: Sequence[SequenceDiagnostics] | None = None,
) -> InvalidRates:
    """Percentages of Err-length / Err-order groups over all generated groups.

    Per-sentence rates (share of sentences with at least one such group) are
    reported alongside.
    """
    if diagnostics is None:
        diagnostics = [decode_sequence(s.n, s)[1] for s in raw_sequences]
    total = SequenceDiagnostics()
    for d in diagnostics:
        total = total + d
    n = len(diagnostics)
    sent_len = 100.0 * sum(d.err_length_count > 0 for d in diagnostics) / n if n else 0.0
    sent_ord = 100.0 * sum(d.err_order_count > 0 for d in diagnostics) / n if n else 0.0
    if total.total_groups == 0:
        return InvalidRates(0.0, 0.0, 0, sent_len, sent_ord, empty=True)
    return InvalidRates(
        100.0 * total.err_length_count / total.total_groups,
        100.0 * total.err_order_count / total.total_groups,
        total.total_groups,
        sent_len,
        sent_ord,
    )


@dataclass
class MetricsReport:
    subtasks: dict[str, Scores] = field(default_factory=dict)
    multi_triplet: SliceReport | None = None
    invalid: InvalidRates | None = None

    def to_dict(self) -> dict:
        out: dict = {name: s.as_dict() for name, s in self.subtasks.items()}
        out = {"subtasks": out}
        if self.multi_triplet is not None:
            out["multi_triplet"] = {
                **self.multi_triplet.scores.as_dict(),
                "n_sentences": self.multi_triplet.n_sentences,
                "empty": self.multi_triplet.empty,
            }
        if self.invalid is not None:
            out["err_length_rate"] = self.invalid.err_length_rate
            out["err_order_rate"] = self.invalid.err_order_rate
            out["invalid"] = asdict(self.invalid)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = []
        cols = list(self.subtasks)
        if cols:
            lines.append("Metric  " + "".join(f"{c.upper():>10}" for c in cols))
            for key, label in (("precision", "P"), ("recall", "R"), ("f1", "F1")):
                lines.append(f"{label:<8}" + "".join(f"{100 * getattr(self.subtasks[c], key):>10.2f}" for c in cols))
        if self.multi_triplet is not None:
            s = self.multi_triplet.scores
            lines.append("")
            lines.append(f"Multi-Triplet ({self.multi_triplet.n_sentences} sentences)")
            lines.append(f"P {100 * s.precision:.2f}  R {100 * s.recall:.2f}  F1 {100 * s.f1:.2f}")
        if self.invalid is not None:
            lines.append("")
            lines.append(f"Err-length {self.invalid.err_length_rate:.2f}%")
            lines.append(f"Err-order  {self.invalid.err_order_rate:.2f}%")
        return "\n".join(lines) + "\n"


def subtasks_for(trained: SubtaskKind) -> list[SubtaskKind]:
    """Subtasks scoreable from a model trained on ``trained`` (by projection)."""
    if trained is SubtaskKind.TRIPLET:
        return [SubtaskKind.AESC, SubtaskKind.PAIR, SubtaskKind.TRIPLET]
    return [trained]


def build_report(
    predictions: Sequence[set[Triplet]],
    golds: Sequence[AnnotatedSentence],
    subtasks: Sequence[SubtaskKind],
    raw_sequences: Sequence[TargetSequence] | None = None,
    diagnostics: Sequence[SequenceDiagnostics] | None = None,
    multi: bool = False,
    invalid: bool = False,
) -> MetricsReport:
    report = MetricsReport()
    for st in subtasks:
        st = SubtaskKind.parse(st)
        report.subtasks[st.value] = exact_match_scores(predictions, golds, st)
    if multi:
        report.multi_triplet = multi_triplet_breakdown(predictions, golds)
    if invalid:
        report.invalid = invalid_rates(raw_sequences or [], diagnostics)
    return report
