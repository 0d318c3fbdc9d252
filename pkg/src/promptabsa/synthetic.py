"""Synthetic annotated sentences for smoke tests and property checks."""

from __future__ import annotations

import random

from .core import AnnotatedSentence, Polarity, Span, Triplet

_TOY = [
    ("Good Sushi High Price .", [((2, 2), (1, 1), "POS"), ((4, 4), (3, 3), "NEG")]),
    ("The waiter was very rude", [((2, 2), (4, 5), "NEG")]),
    ("great beer selection and friendly owners", [((2, 3), (1, 1), "POS"), ((6, 6), (5, 5), "POS")]),
    ("the battery lasts long", [((2, 2), (3, 4), "POS")]),
    ("screen is dim but keyboard is fine", [((1, 1), (3, 3), "NEG"), ((5, 5), (7, 7), "NEU")]),
    ("decent pasta , awful dessert", [((2, 2), (1, 1), "NEU"), ((5, 5), (4, 4), "NEG")]),
    ("fast delivery", [((2, 2), (1, 1), "POS")]),
    ("noisy room but tasty food and cheap wine", [((2, 2), (1, 1), "NEG"), ((5, 5), (4, 4), "POS"), ((8, 8), (7, 7), "POS")]),
]


def toy_corpus() -> list[AnnotatedSentence]:
    """Eight short review sentences with hand-written triplets."""
    out = []
    for text, trips in _TOY:
        out.append(
            AnnotatedSentence(
                tuple(text.split()),
                tuple(Triplet(Span(*a), Span(*o), Polarity[p]) for a, o, p in trips),
                text,
            )
        )
    return out


def _random_span(rng: random.Random, n: int, max_len: int = 4) -> Span:
    start = rng.randint(1, n)
    end = min(n, start + rng.randint(0, max_len - 1))
    return Span(start, end)


def random_sentence(rng: random.Random, max_n: int = 30, max_triplets: int = 5, share_aspect: float = 0.3) -> AnnotatedSentence:
    n = rng.randint(1, max_n)
    words = tuple(f"w{rng.randrange(50)}" for _ in range(n))
    k = rng.randint(0, max_triplets)
    pairs: dict[tuple[Span, Span], Polarity] = {}
    aspects: list[Span] = []
    for _ in range(k * 4):
        if len(pairs) >= k:
            break
        if aspects and rng.random() < share_aspect:
            a = rng.choice(aspects)
        else:
            a = _random_span(rng, n)
        o = _random_span(rng, n)
        if (a, o) in pairs:
            continue
        pairs[(a, o)] = rng.choice(list(Polarity))
        aspects.append(a)
    trips = tuple(Triplet(a, o, p) for (a, o), p in pairs.items())
    return AnnotatedSentence(words, trips)
