"""Domain types and the codec between triplet sets and target index sequences.

Index conventions
-----------------
Pointer indices address words and are 1-based: ``1..n``.  Class indices sit
directly after the pointer space: polarity ``p`` is encoded as
``n + 1 + rank(p)`` with the fixed order POS, NEG, NEU.  Special start/end
tokens are not part of this space; the model layer handles them.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import CodecInputError, ValidationError


class Polarity(enum.Enum):
    POS = "POS"
    NEG = "NEG"
    NEU = "NEU"

    @property
    def rank(self) -> int:
        return _POLARITY_ORDER.index(self)

    @classmethod
    def from_rank(cls, rank: int) -> "Polarity":
        return _POLARITY_ORDER[rank]

    @classmethod
    def parse(cls, value: "str | Polarity") -> "Polarity":
        if isinstance(value, Polarity):
            return value
        try:
            return cls[value.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown polarity {value!r}") from None


_POLARITY_ORDER = (Polarity.POS, Polarity.NEG, Polarity.NEU)
CLASS_LIST: tuple[Polarity, ...] = _POLARITY_ORDER
CLASS_COUNT = len(CLASS_LIST)


@dataclass(frozen=True, order=True)
class Span:
    """Inclusive 1-based word span."""

    start: int
    end: int

    def __post_init__(self):
        if not (1 <= self.start <= self.end):
            raise ValidationError(f"invalid span [{self.start}, {self.end}]")

    def __len__(self) -> int:
        return self.end - self.start + 1

    def words(self, words: Sequence[str]) -> tuple[str, ...]:
        return tuple(words[self.start - 1 : self.end])

    def as_list(self) -> list[int]:
        return [self.start, self.end]


@dataclass(frozen=True)
class Triplet:
    """An (aspect, opinion, polarity) tuple.

    Decoded AESC groups carry ``opinion=None``; decoded PAIR groups carry
    ``polarity=None`` (the no-polarity sentinel).
    """

    aspect: Span
    opinion: Span | None
    polarity: Polarity | None

    def sort_key(self) -> tuple:
        o = (self.opinion.start, self.opinion.end) if self.opinion else (0, 0)
        p = self.polarity.rank if self.polarity else -1
        return (self.aspect.start, o[0], self.aspect.end, o[1], p)


class SubtaskKind(enum.Enum):
    AESC = "aesc"
    PAIR = "pair"
    TRIPLET = "triplet"

    @property
    def group_size(self) -> int:
        return {"aesc": 3, "pair": 4, "triplet": 5}[self.value]

    @property
    def pointer_count(self) -> int:
        return {"aesc": 2, "pair": 4, "triplet": 4}[self.value]

    @property
    def has_class(self) -> bool:
        return self is not SubtaskKind.PAIR

    @classmethod
    def parse(cls, value: "str | SubtaskKind") -> "SubtaskKind":
        if isinstance(value, SubtaskKind):
            return value
        try:
            return cls(value.strip().lower())
        except ValueError:
            raise ValueError(f"unknown subtask {value!r}") from None


def project(triplet: Triplet, subtask: SubtaskKind) -> tuple:
    """Comparison key of a triplet under ``subtask``."""
    if subtask is SubtaskKind.AESC:
        return (triplet.aspect, triplet.polarity)
    if subtask is SubtaskKind.PAIR:
        return (triplet.aspect, triplet.opinion)
    return (triplet.aspect, triplet.opinion, triplet.polarity)


@dataclass(frozen=True)
class AnnotatedSentence:
    words: tuple[str, ...]
    triplets: tuple[Triplet, ...] = ()
    raw_text: str = ""

    def __post_init__(self):
        object.__setattr__(self, "words", tuple(self.words))
        trips = tuple(sorted(self.triplets, key=Triplet.sort_key))
        object.__setattr__(self, "triplets", trips)
        if not self.raw_text:
            object.__setattr__(self, "raw_text", " ".join(self.words))
        n = len(self.words)
        if n < 1:
            raise ValidationError("sentence has no words")
        seen = set()
        for t in trips:
            if t.opinion is None or t.polarity is None:
                raise ValidationError("gold triplets need aspect, opinion and polarity")
            if t.aspect.end > n or t.opinion.end > n:
                raise ValidationError(f"span out of bounds for sentence of length {n}")
            pair = (t.aspect, t.opinion)
            if pair in seen:
                raise ValidationError(
                    f"duplicate aspect/opinion pair {t.aspect.as_list()}/{t.opinion.as_list()}"
                )
            seen.add(pair)

    @property
    def n(self) -> int:
        return len(self.words)

    def gold_pairs(self) -> set[tuple[Span, Span]]:
        return {(t.aspect, t.opinion) for t in self.triplets}

    def projected(self, subtask: SubtaskKind) -> set[tuple]:
        return {project(t, subtask) for t in self.triplets}


@dataclass(frozen=True)
class TargetSequence:
    indices: tuple[int, ...]
    n: int
    subtask: SubtaskKind = SubtaskKind.TRIPLET
    class_count: int = CLASS_COUNT
    truncated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        _check_range(self.indices, self.n, self.class_count)

    def __len__(self) -> int:
        return len(self.indices)


@dataclass
class SequenceDiagnostics:
    err_length_count: int = 0
    err_order_count: int = 0
    total_groups: int = 0

    def __add__(self, other: "SequenceDiagnostics") -> "SequenceDiagnostics":
        return SequenceDiagnostics(
            self.err_length_count + other.err_length_count,
            self.err_order_count + other.err_order_count,
            self.total_groups + other.total_groups,
        )

    @property
    def valid_groups(self) -> int:
        return self.total_groups - self.err_length_count - self.err_order_count


def _check_range(indices: Iterable[int], n: int, class_count: int) -> None:
    hi = n + class_count
    for pos, y in enumerate(indices):
        if not (1 <= y <= hi):
            raise CodecInputError(f"index {y} at position {pos} outside [1, {hi}]")


def encode_targets(sentence: AnnotatedSentence, subtask: SubtaskKind) -> TargetSequence:
    subtask = SubtaskKind.parse(subtask)
    n = sentence.n
    out: list[int] = []
    seen: set[tuple] = set()
    for t in sorted(sentence.triplets, key=Triplet.sort_key):
        if subtask is SubtaskKind.AESC:
            group = (t.aspect.start, t.aspect.end, n + 1 + t.polarity.rank)
        elif subtask is SubtaskKind.PAIR:
            group = (t.aspect.start, t.aspect.end, t.opinion.start, t.opinion.end)
        else:
            group = (
                t.aspect.start, t.aspect.end,
                t.opinion.start, t.opinion.end,
                n + 1 + t.polarity.rank,
            )
        if group in seen:
            continue
        seen.add(group)
        out.extend(group)
    return TargetSequence(tuple(out), n, subtask)


def _group_to_triplet(buf: list[int], subtask: SubtaskKind, polarity: Polarity | None):
    if subtask is SubtaskKind.AESC:
        if buf[0] > buf[1]:
            return None
        return Triplet(Span(buf[0], buf[1]), None, polarity)
    if buf[0] > buf[1] or buf[2] > buf[3]:
        return None
    return Triplet(Span(buf[0], buf[1]), Span(buf[2], buf[3]), polarity)


def decode_sequence(
    n: int,
    sequence: "TargetSequence | Sequence[int]",
    subtask: SubtaskKind | str | None = None,
) -> tuple[set[Triplet], SequenceDiagnostics]:
    """Convert an index sequence back into triplets, counting malformed groups.

    Pointer indices accumulate in a buffer that is flushed whenever a class
    index arrives (AESC/TRIPLET).  A flushed buffer of the wrong size is an
    Err-length group, a right-sized one with start > end is Err-order.  A
    non-empty buffer left at the end counts as one Err-length group.  PAIR
    groups are cut every four pointer indices; a class index there closes the
    pending buffer as a malformed group.
    """
    if isinstance(sequence, TargetSequence):
        if subtask is None:
            subtask = sequence.subtask
        indices = sequence.indices
    else:
        indices = tuple(int(y) for y in sequence)
        _check_range(indices, n, CLASS_COUNT)
    subtask = SubtaskKind.parse(subtask or SubtaskKind.TRIPLET)
    width = subtask.pointer_count

    found: set[Triplet] = set()
    diag = SequenceDiagnostics()
    buf: list[int] = []

    def flush(polarity: Polarity | None) -> None:
        diag.total_groups += 1
        if len(buf) != width:
            diag.err_length_count += 1
            return
        trip = _group_to_triplet(buf, subtask, polarity)
        if trip is None:
            diag.err_order_count += 1
        else:
            found.add(trip)

    for y in indices:
        if y > n:
            if subtask is SubtaskKind.PAIR:
                # no class tokens are expected: the stray index ends the group
                flush(None)
            else:
                flush(CLASS_LIST[y - n - 1])
            buf = []
        else:
            buf.append(y)
            if subtask is SubtaskKind.PAIR and len(buf) == width:
                flush(None)
                buf = []
    if buf:
        diag.total_groups += 1
        diag.err_length_count += 1
    return found, diag


def round_trip_check(sentence: AnnotatedSentence, subtask: SubtaskKind) -> bool:
    subtask = SubtaskKind.parse(subtask)
    seq = encode_targets(sentence, subtask)
    decoded, diag = decode_sequence(sentence.n, seq)
    if diag.err_length_count or diag.err_order_count:
        return False
    return {project(t, subtask) for t in decoded} == sentence.projected(subtask)


__all__ = [
    "CLASS_COUNT",
    "CLASS_LIST",
    "AnnotatedSentence",
    "Polarity",
    "SequenceDiagnostics",
    "Span",
    "SubtaskKind",
    "TargetSequence",
    "Triplet",
    "decode_sequence",
    "encode_targets",
    "project",
    "round_trip_check",
]
