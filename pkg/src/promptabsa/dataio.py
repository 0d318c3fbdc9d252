"""Dataset loading, conversion, few-shot sampling and statistics.

Two on-disk formats are understood:

* ``jsonl`` (canonical): one object per line with ``raw_text``, ``words`` and
  ``triplets`` (``{"aspect": [s, e], "opinion": [s, e], "polarity": "POS"}``),
  spans 1-based and inclusive.
* ``legacy``: ``<sentence>####[([a idxs], [o idxs], 'POS'), ...]`` with 0-based
  contiguous word-index lists, as shipped with the public triplet benchmarks.
"""

from __future__ import annotations

import ast
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .core import AnnotatedSentence, Polarity, Span, Triplet
from .errors import ParseError, ValidationError

log = logging.getLogger(__name__)

DATA_ROOT_ENV = "PROMPTABSA_DATA_ROOT"
SPLIT_NAMES = ("train", "dev", "test")
PUBLISHED_SEEDS = (544, 3210, 8, 5678, 744)


@dataclass(frozen=True)
class DatasetSplit:
    name: str
    sentences: tuple[AnnotatedSentence, ...]
    source_version: str = ""
    empty_warning: bool = False

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(self.sentences))
        if self.name not in SPLIT_NAMES:
            raise ValueError(f"split name must be one of {SPLIT_NAMES}, got {self.name!r}")

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class FewShotSpec:
    fraction: float
    seed: int

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"few-shot fraction must lie in (0, 1], got {self.fraction}")

    def subset_size(self, total: int) -> int:
        return max(1, math.floor(self.fraction * total))


@dataclass(frozen=True)
class DatasetStats:
    n_sentences: int
    n_triplets: int
    n_multi_triplet: int

    def as_dict(self) -> dict:
        return {
            "n_sentences": self.n_sentences,
            "n_triplets": self.n_triplets,
            "n_multi_triplet": self.n_multi_triplet,
        }

    def __iter__(self):
        return iter((self.n_sentences, self.n_triplets, self.n_multi_triplet))


def _index_list_to_span(idxs, line_number: int | None) -> Span:
    if not isinstance(idxs, (list, tuple)) or not idxs:
        raise ValidationError(f"expected a non-empty index list, got {idxs!r}", line_number)
    if any(not isinstance(i, int) or i < 0 for i in idxs):
        raise ValidationError(f"index list must hold non-negative integers: {idxs!r}", line_number)
    ordered = sorted(idxs)
    if ordered != list(range(ordered[0], ordered[-1] + 1)) or len(set(idxs)) != len(idxs):
        raise ValidationError(f"non-contiguous index list {list(idxs)}", line_number)
    return Span(ordered[0] + 1, ordered[-1] + 1)


def parse_legacy_line(line: str, line_number: int | None = None) -> AnnotatedSentence:
    text, sep, annotation = line.rstrip("\r\n").partition("####")
    if not sep:
        raise ParseError("missing '####' separator", line_number)
    words = text.split()
    if not words:
        raise ParseError("empty sentence", line_number)
    try:
        raw = ast.literal_eval(annotation.strip())
    except (ValueError, SyntaxError) as exc:
        raise ParseError(f"malformed triplet list: {exc}", line_number) from None
    if not isinstance(raw, list):
        raise ParseError("triplet annotation must be a list", line_number)
    triplets = []
    for item in raw:
        if not isinstance(item, tuple) or len(item) != 3:
            raise ParseError(f"expected (aspect, opinion, polarity) tuple, got {item!r}", line_number)
        a, o, s = item
        try:
            pol = Polarity.parse(s)
        except (ValueError, AttributeError):
            raise ParseError(f"unknown polarity {s!r}", line_number) from None
        triplets.append(
            Triplet(_index_list_to_span(a, line_number), _index_list_to_span(o, line_number), pol)
        )
    try:
        return AnnotatedSentence(tuple(words), tuple(triplets), text.strip())
    except ValidationError as exc:
        raise ValidationError(str(exc), line_number) from None


def sentence_to_record(sentence: AnnotatedSentence) -> dict:
    return {
        "raw_text": sentence.raw_text,
        "words": list(sentence.words),
        "triplets": [
            {
                "aspect": t.aspect.as_list(),
                "opinion": t.opinion.as_list(),
                "polarity": t.polarity.value,
            }
            for t in sentence.triplets
        ],
    }


def record_to_sentence(record: dict, line_number: int | None = None) -> AnnotatedSentence:
    try:
        words = record["words"]
        trips = [
            Triplet(
                Span(*t["aspect"]),
                Span(*t["opinion"]),
                Polarity.parse(t["polarity"]),
            )
            for t in record.get("triplets", [])
        ]
    except ValidationError as exc:
        raise ValidationError(str(exc), line_number) from None
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"bad record: {exc!r}", line_number) from None
    try:
        return AnnotatedSentence(tuple(words), tuple(trips), record.get("raw_text", ""))
    except ValidationError as exc:
        raise ValidationError(str(exc), line_number) from None


def _guess_split_name(path: Path) -> str:
    stem = path.name.lower()
    for name in SPLIT_NAMES:
        if stem.startswith(name):
            return name
    return "train"


def resolve_path(path: "str | os.PathLike") -> Path:
    """Resolve relative paths against ``$PROMPTABSA_DATA_ROOT`` when they do not exist locally."""
    p = Path(path)
    if not p.exists() and not p.is_absolute() and os.environ.get(DATA_ROOT_ENV):
        alt = Path(os.environ[DATA_ROOT_ENV]) / p
        if alt.exists():
            return alt
    return p


def load_dataset(
    path: "str | os.PathLike",
    format: str | None = None,
    name: str | None = None,
    source_version: str = "",
) -> DatasetSplit:
    path = resolve_path(path)
    if format is None:
        format = "jsonl" if path.suffix in (".jsonl", ".json") else "legacy"
    if format not in ("jsonl", "legacy"):
        raise ValueError(f"unknown dataset format {format!r}")
    sentences = []
    with open(path, encoding="utf-8") as fh:
        for number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if format == "legacy":
                sentences.append(parse_legacy_line(line, number))
            else:
                try:
                    record = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid json: {exc.msg}", number) from None
                sentences.append(record_to_sentence(record, number))
    if not sentences:
        log.warning("dataset %s is empty", path)
    return DatasetSplit(
        name or _guess_split_name(path),
        tuple(sentences),
        source_version,
        empty_warning=not sentences,
    )


def save_jsonl(sentences: Iterable[AnnotatedSentence], path: "str | os.PathLike") -> int:
    count = 0
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for s in sentences:
            fh.write(json.dumps(sentence_to_record(s), ensure_ascii=False) + "\n")
            count += 1
    return count


def find_split_file(directory: "str | os.PathLike", split: str) -> tuple[Path, str] | None:
    """Locate ``<split>.jsonl`` or a legacy ``<split>_triplets.txt``/``<split>.txt`` file."""
    d = resolve_path(directory)
    for fname, fmt in (
        (f"{split}.jsonl", "jsonl"),
        (f"{split}_triplets.txt", "legacy"),
        (f"{split}.txt", "legacy"),
    ):
        if (d / fname).exists():
            return d / fname, fmt
    return None


def few_shot_sample(split: DatasetSplit, spec: FewShotSpec) -> DatasetSplit:
    """Seeded uniform subsample without replacement, original order preserved."""
    if not isinstance(spec, FewShotSpec):
        raise TypeError("spec must be a FewShotSpec")
    total = len(split)
    if total == 0:
        raise ValueError("cannot sample from an empty split")
    k = spec.subset_size(total)
    if k >= total:
        return split
    rng = np.random.default_rng(spec.seed)
    chosen = np.sort(rng.permutation(total)[:k])
    return DatasetSplit(
        split.name,
        tuple(split.sentences[i] for i in chosen),
        split.source_version,
    )


def is_multi_triplet(sentence: AnnotatedSentence) -> bool:
    aspects = {t.aspect for t in sentence.triplets}
    opinions = {t.opinion for t in sentence.triplets}
    return len(aspects) > 1 or len(opinions) > 1


def dataset_stats(split: "DatasetSplit | Sequence[AnnotatedSentence]") -> DatasetStats:
    sentences = split.sentences if isinstance(split, DatasetSplit) else tuple(split)
    return DatasetStats(
        len(sentences),
        sum(len(s.triplets) for s in sentences),
        sum(is_multi_triplet(s) for s in sentences),
    )


@dataclass
class DatasetBundle:
    """Train/dev/test splits of one dataset directory."""

    splits: dict[str, DatasetSplit] = field(default_factory=dict)

    def __getitem__(self, name: str) -> DatasetSplit:
        return self.splits[name]

    def get(self, name: str) -> DatasetSplit | None:
        return self.splits.get(name)


def load_bundle(directory: "str | os.PathLike", source_version: str = "") -> DatasetBundle:
    bundle = DatasetBundle()
    for split in SPLIT_NAMES:
        found = find_split_file(directory, split)
        if found:
            path, fmt = found
            bundle.splits[split] = load_dataset(path, fmt, split, source_version)
    if "train" not in bundle.splits:
        raise FileNotFoundError(f"no train split found under {directory}")
    return bundle
