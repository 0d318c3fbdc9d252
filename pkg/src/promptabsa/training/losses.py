from __future__ import annotations

from typing import Sequence

import torch
import torch.nn.functional as F

from ..prompting import LABEL_WORDS, LabelWord


def generation_loss(p_sequence, gold: Sequence[int]) -> torch.Tensor:
    """Mean negative log-probability of the gold candidate at every step.

    ``p_sequence`` holds one probability vector per gold position (end token
    included); ``gold`` holds 0-based candidate columns.
    """
    p = torch.as_tensor(p_sequence) if not isinstance(p_sequence, torch.Tensor) else p_sequence
    gold = torch.as_tensor(list(gold), dtype=torch.long)
    if p.dim() != 2 or p.shape[0] != gold.shape[0]:
        raise ValueError(f"{p.shape[0] if p.dim() else 0} distributions for {gold.shape[0]} gold steps")
    return -torch.log(p[torch.arange(len(gold)), gold]).mean()


def generation_loss_from_logits(logits: torch.Tensor, gold_columns: torch.Tensor, ignore_index: int = -100):
    """Batched teacher-forced cross-entropy; equal to :func:`generation_loss` on the softmax."""
    if logits.shape[:2] != gold_columns.shape:
        raise ValueError(f"logits {tuple(logits.shape)} do not match gold {tuple(gold_columns.shape)}")
    return F.cross_entropy(logits.flatten(0, 1), gold_columns.flatten(), ignore_index=ignore_index)


def prompt_loss(mask_distributions, mask_labels, reduction: str = "mean") -> torch.Tensor:
    """Cross-entropy of the gold label word at each mask.

    ``reduction="sum"`` gives the plain double sum; ``"mean"`` divides by the
    number of masks.
    """
    p = torch.as_tensor(mask_distributions) if not isinstance(mask_distributions, torch.Tensor) else mask_distributions
    idx = []
    for lab in mask_labels:
        if isinstance(lab, LabelWord):
            idx.append(lab.index)
        elif isinstance(lab, int) and 0 <= lab < len(LABEL_WORDS):
            idx.append(lab)
        else:
            raise ValueError(f"mask label {lab!r} is not a label word")
    idx = torch.tensor(idx, dtype=torch.long)
    if p.shape[0] != len(idx):
        raise ValueError(f"{p.shape[0]} mask distributions for {len(idx)} labels")
    nll = -torch.log(p[torch.arange(len(idx)), idx])
    return nll.sum() if reduction == "sum" else nll.mean()


def prompt_loss_from_logits(logits: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    return F.cross_entropy(logits, labels)


def joint_loss(l_prompt, l_gen, alpha1: float, alpha2: float):
    return alpha1 * l_prompt + alpha2 * l_gen
