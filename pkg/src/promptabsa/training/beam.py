"""Length-capped beam search over pointer/class/end candidates."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import torch

from ..core import AnnotatedSentence, SubtaskKind, TargetSequence


@dataclass
class BeamHypothesis:
    prefix: tuple[int, ...] = ()
    log_prob: float = 0.0
    finished: bool = False
    truncated: bool = False
    history: list[float] = field(default_factory=list)


StepFn = Callable[[Sequence[Sequence[int]]], torch.Tensor]


def beam_search(step_fn: StepFn, n_candidates: int, beam_size: int, max_len: int) -> BeamHypothesis:
    """Generic beam search.

    ``step_fn(prefixes)`` returns ``(len(prefixes), n_candidates)`` log-probs
    whose last column is the end token; candidate ``c`` (0-based) stands for
    index ``c + 1``.  ``max_len`` caps the number of steps including the end
    step; a hypothesis that hits the cap without ending is kept as truncated.
    Ties are broken by lower candidate index, then by earlier beam rank.
    """
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    end = n_candidates - 1
    alive = [BeamHypothesis()]
    finished: list[BeamHypothesis] = []
    for _ in range(max_len):
        logp = step_fn([h.prefix for h in alive]).detach().double().cpu()
        cands = []
        for rank, hyp in enumerate(alive):
            row = logp[rank].tolist()
            for c, lp in enumerate(row):
                if lp == float("-inf"):
                    continue
                cands.append((-(hyp.log_prob + lp), c, rank, lp))
        cands.sort()
        alive_next = []
        for neg, c, rank, lp in cands[:beam_size]:
            parent = alive[rank]
            if c == end:
                finished.append(BeamHypothesis(parent.prefix, -neg, True, False, parent.history + [lp]))
            else:
                alive_next.append(BeamHypothesis(parent.prefix + (c + 1,), -neg, False, False, parent.history + [lp]))
        alive = alive_next
        best_done = max((f.log_prob for f in finished), default=float("-inf"))
        # scores only decrease with length, so no live beam can overtake it
        if not alive or best_done >= alive[0].log_prob:
            break
    else:
        for h in alive:
            finished.append(BeamHypothesis(h.prefix, h.log_prob, True, True, h.history))
    finished.sort(key=lambda h: (-h.log_prob, h.truncated, h.prefix))
    return finished[0]


@torch.no_grad()
def beam_generate(
    model,
    sentence: AnnotatedSentence,
    beam_size: int = 4,
    max_len: int = 32,
    subtask: SubtaskKind = SubtaskKind.TRIPLET,
) -> TargetSequence:
    was_training = model.training
    model.eval()
    try:
        state = model.encode([sentence])
        n_cand = sentence.n + 3 + 1

        def step(prefixes):
            return model.step_log_probs(state.select(0, len(prefixes)), prefixes)

        best = beam_search(step, n_cand, beam_size, max_len)
    finally:
        model.train(was_training)
    return TargetSequence(best.prefix, sentence.n, SubtaskKind.parse(subtask), truncated=best.truncated)
