"""Consistency / polarity prompt construction from gold triplets."""

from __future__ import annotations

import enum
import json
import logging
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .core import AnnotatedSentence, Polarity, Span
from .errors import ManipulationImpossible, SampleError, TemplateError

log = logging.getLogger(__name__)


class LabelWord(enum.Enum):
    YES = "yes"
    NO = "no"
    POS = "positive"
    NEG = "negative"
    NEU = "neutral"

    @property
    def surface(self) -> str:
        return self.value

    @property
    def index(self) -> int:
        return LABEL_WORDS.index(self)

    @classmethod
    def for_polarity(cls, polarity: Polarity) -> "LabelWord":
        return cls[polarity.name]


LABEL_WORDS: tuple[LabelWord, ...] = tuple(LabelWord)
CONSISTENCY_LABELS = (LabelWord.YES, LabelWord.NO)
POLARITY_LABELS = (LabelWord.POS, LabelWord.NEG, LabelWord.NEU)

MASK_SURFACE = "[MASK]"
_SLOT_A, _SLOT_O, _SLOT_MASK = "{A}", "{O}", "{MASK}"


@dataclass(frozen=True)
class Slot:
    """One position group of a prompt layout.

    ``kind`` is ``pseudo`` (value: 1-based pseudo index), ``text`` (a fixed
    word), ``aspect``/``opinion`` (value: tuple of words) or ``mask``.
    """

    kind: str
    value: object = None

    def surface(self) -> str:
        if self.kind == "pseudo":
            return f"P{self.value}"
        if self.kind == "mask":
            return MASK_SURFACE
        if self.kind in ("aspect", "opinion"):
            return " ".join(self.value)
        return str(self.value)


@dataclass(frozen=True)
class Template:
    name: str
    kind: str = "auto"
    l1: int = 1
    l2: int = 2
    lP: int = 3
    manual_text: tuple[str, str] | None = None

    def __post_init__(self):
        if self.kind not in ("auto", "manual"):
            raise TemplateError(f"template kind must be auto or manual, got {self.kind!r}")
        if self.kind == "auto":
            if not (0 <= self.l1 <= self.l2 <= self.lP):
                raise TemplateError(f"need l1 <= l2 <= lP, got {self.l1}, {self.l2}, {self.lP}")
        else:
            if self.manual_text is None or len(self.manual_text) != 2:
                raise TemplateError("manual template needs (consistency, polarity) text")
            head, tail = self.manual_text
            for slot in (_SLOT_A, _SLOT_O, _SLOT_MASK):
                if head.split().count(slot) != 1:
                    raise TemplateError(f"consistency text must contain {slot} exactly once: {head!r}")
            if tail.split().count(_SLOT_MASK) != 1:
                raise TemplateError(f"polarity text must contain {_SLOT_MASK} exactly once: {tail!r}")

    @property
    def pseudo_count(self) -> int:
        return self.lP if self.kind == "auto" else 0

    @classmethod
    def auto(cls, n: int) -> "Template":
        return cls(f"auto{n}", "auto", n, 2 * n, 3 * n)

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind}
        if self.kind == "auto":
            d.update(l1=self.l1, l2=self.l2, lP=self.lP)
        else:
            d["manual_text"] = list(self.manual_text)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Template":
        if d.get("kind", "auto") == "manual":
            return cls(d["name"], "manual", 0, 0, 0, tuple(d["manual_text"]))
        return cls(d["name"], "auto", int(d["l1"]), int(d["l2"]), int(d["lP"]))


MANUAL_TEMPLATE = Template(
    "manual", "manual", 0, 0, 0, ("The {A} is {O} ? {MASK}", ". This is {MASK}")
)
PRESET_TEMPLATES: dict[str, Template] = {
    **{f"auto{n}": Template.auto(n) for n in (1, 2, 3)},
    "manual": MANUAL_TEMPLATE,
}


def load_template_catalog(path: "str | Path | None" = None) -> dict[str, Template]:
    """Presets merged with the named templates of a json catalog file.

    The file holds either a list of template objects or ``{"templates": [...]}``.
    """
    catalog = dict(PRESET_TEMPLATES)
    if path is None:
        return catalog
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    entries = data["templates"] if isinstance(data, dict) else data
    for entry in entries:
        t = Template.from_dict(entry)
        catalog[t.name] = t
    return catalog


def get_template(name: str, catalog: dict[str, Template] | None = None) -> Template:
    catalog = catalog or PRESET_TEMPLATES
    try:
        return catalog[name]
    except KeyError:
        raise TemplateError(f"unknown template {name!r}; known: {sorted(catalog)}") from None


def template_words(template: Template) -> list[str]:
    """Fixed words a manual template needs in the vocabulary."""
    if template.kind != "manual":
        return ["?"]
    words = []
    for part in template.manual_text:
        words += [w for w in part.split() if w not in (_SLOT_A, _SLOT_O, _SLOT_MASK)]
    return words


@dataclass(frozen=True)
class PromptSample:
    token_layout: tuple[Slot, ...]
    aspect: Span
    opinion: Span
    consistency_label: LabelWord
    polarity_label: Polarity | None = None
    source_sentence_id: int | None = None
    manipulated: bool = False

    @property
    def mask_count(self) -> int:
        return sum(1 for s in self.token_layout if s.kind == "mask")

    @property
    def mask_labels(self) -> tuple[LabelWord, ...]:
        if self.polarity_label is None:
            return (self.consistency_label,)
        return (self.consistency_label, LabelWord.for_polarity(self.polarity_label))

    def text(self) -> str:
        out = " ".join(s.surface() for s in self.token_layout)
        return out.replace(" ?", "?").replace(" .", ".")


@dataclass(frozen=True)
class PromptConfig:
    k_samples: int = 2
    manipulation_prob: float = 0.3


def sample_pair(
    sentence: AnnotatedSentence, rng: random.Random, config: PromptConfig | None = None
) -> tuple[Span, Span, bool]:
    """Draw an aspect and an opinion independently from the gold spans."""
    if not sentence.triplets:
        raise SampleError("sentence has no triplets")
    aspects = sorted({t.aspect for t in sentence.triplets})
    opinions = sorted({t.opinion for t in sentence.triplets})
    a = aspects[rng.randrange(len(aspects))]
    o = opinions[rng.randrange(len(opinions))]
    return a, o, (a, o) in sentence.gold_pairs()


def proper_subspans(span: Span) -> list[Span]:
    return [
        Span(s, e)
        for s in range(span.start, span.end + 1)
        for e in range(s, span.end + 1)
        if (s, e) != (span.start, span.end)
    ]


def manipulate_span(
    span: Span, sentence: AnnotatedSentence, rng: random.Random, side: str | None = None
) -> Span:
    """Shrink a multi-word span to a proper sub-span, or grow a one-word span.

    One-word spans get 1 or 2 neighbours on a uniformly chosen available side
    (``side`` forces ``"left"`` or ``"right"``).
    """
    n = sentence.n
    if span.end > n:
        raise ValueError(f"span {span.as_list()} out of bounds for n={n}")
    if len(span) > 1:
        subs = proper_subspans(span)
        return subs[rng.randrange(len(subs))]
    free = {"left": span.start - 1, "right": n - span.end}
    sides = [s for s in ("left", "right") if free[s] > 0]
    if side is not None:
        sides = [s for s in sides if s == side]
    if not sides:
        raise ManipulationImpossible(f"no free neighbours around {span.as_list()}")
    chosen = sides[rng.randrange(len(sides))]
    k = rng.randint(1, min(2, free[chosen]))
    if chosen == "left":
        return Span(span.start - k, span.end)
    return Span(span.start, span.end + k)


def render_prompt(
    sentence: AnnotatedSentence,
    aspect: Span,
    opinion: Span,
    consistent: bool,
    polarity: Polarity | None,
    template: Template,
    sentence_id: int | None = None,
    manipulated: bool = False,
) -> PromptSample:
    if consistent != (polarity is not None):
        raise ValueError("polarity must be given iff the pair is consistent")
    a_slot = Slot("aspect", aspect.words(sentence.words))
    o_slot = Slot("opinion", opinion.words(sentence.words))
    if template.kind == "manual":
        fill = {_SLOT_A: a_slot, _SLOT_O: o_slot, _SLOT_MASK: Slot("mask")}
        head, tail = template.manual_text
        layout = [fill.get(tok) or Slot("text", tok) for tok in head.split()]
        if consistent:
            layout += [fill.get(tok) or Slot("text", tok) for tok in tail.split()]
    else:
        l1, l2, lp = template.l1, template.l2, template.lP
        layout = [Slot("pseudo", k) for k in range(1, l1 + 1)]
        layout.append(a_slot)
        layout += [Slot("pseudo", k) for k in range(l1 + 1, l2 + 1)]
        layout += [o_slot, Slot("text", "?"), Slot("mask")]
        if consistent:
            layout += [Slot("pseudo", k) for k in range(l2 + 1, lp + 1)]
            layout.append(Slot("mask"))
    return PromptSample(
        tuple(layout),
        aspect,
        opinion,
        LabelWord.YES if consistent else LabelWord.NO,
        polarity,
        sentence_id,
        manipulated,
    )


def _manipulate_pair(a: Span, o: Span, sentence: AnnotatedSentence, rng: random.Random):
    order = ["aspect", "opinion"]
    if rng.random() < 0.5:
        order.reverse()
    for which in order:
        try:
            if which == "aspect":
                return manipulate_span(a, sentence, rng), o
            return a, manipulate_span(o, sentence, rng)
        except ManipulationImpossible:
            continue
    raise ManipulationImpossible("neither span can be manipulated")


def build_prompt_batch(
    sentence: AnnotatedSentence,
    rng: random.Random,
    config: PromptConfig | None = None,
    template: Template = PRESET_TEMPLATES["auto1"],
    sentence_id: int | None = None,
) -> list[PromptSample]:
    config = config or PromptConfig()
    if not sentence.triplets:
        return []
    gold = {(t.aspect, t.opinion): t.polarity for t in sentence.triplets}
    out = []
    for _ in range(config.k_samples):
        a, o, _consistent = sample_pair(sentence, rng, config)
        manipulated = False
        if config.manipulation_prob > 0 and rng.random() < config.manipulation_prob:
            try:
                a, o = _manipulate_pair(a, o, sentence, rng)
                manipulated = True
            except ManipulationImpossible:
                pass
        # label always re-derived from gold membership
        polarity = gold.get((a, o))
        out.append(
            render_prompt(
                sentence, a, o, polarity is not None, polarity, template, sentence_id, manipulated
            )
        )
    return out


def label_mix(samples: Sequence[PromptSample]) -> dict[str, int]:
    mix = {w.surface: 0 for w in LABEL_WORDS}
    for s in samples:
        for lab in s.mask_labels:
            mix[lab.surface] += 1
    return mix
