"""Pointer-network generation head and the mask-label head."""

from __future__ import annotations

from typing import Sequence

import torch
from torch import nn

from ..core import CLASS_LIST, Polarity
from ..errors import ShapeError


def _mlp(d: int) -> nn.Sequential:
    return nn.Sequential(nn.Linear(d, d), nn.ReLU(), nn.Linear(d, d))


class PointerHead(nn.Module):
    """Holds the blend weight and the affine stack applied to encoder states."""

    def __init__(self, d_model: int, alpha: float = 0.5):
        super().__init__()
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        self.alpha = float(alpha)
        self.mlp = _mlp(d_model)

    def blend(self, enc_states: torch.Tensor, enc_embeds: torch.Tensor) -> torch.Tensor:
        if enc_states.shape != enc_embeds.shape:
            raise ShapeError(f"encoder states {tuple(enc_states.shape)} vs embeddings {tuple(enc_embeds.shape)}")
        return self.alpha * self.mlp(enc_states) + (1.0 - self.alpha) * enc_embeds


def pointer_scores(enc_states, enc_embeds, class_embeds, h_t, alpha, mlp=None) -> torch.Tensor:
    if enc_states.dim() != 2 or class_embeds.dim() != 2:
        raise ShapeError("encoder states and class embeddings must be 2-d")
    if enc_states.shape != enc_embeds.shape:
        raise ShapeError(f"encoder states {tuple(enc_states.shape)} vs embeddings {tuple(enc_embeds.shape)}")
    d = enc_states.shape[-1]
    if class_embeds.shape[-1] != d or h_t.shape[-1] != d:
        raise ShapeError(f"hidden size mismatch: {d}, {class_embeds.shape[-1]}, {h_t.shape[-1]}")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    mixed = enc_states if mlp is None else mlp(enc_states)
    blended = alpha * mixed + (1.0 - alpha) * enc_embeds
    candidates = torch.cat([blended, class_embeds], dim=0)
    return candidates @ (h_t.T if h_t.dim() == 2 else h_t)


def pointer_distribution(enc_states, enc_embeds, class_embeds, h_t, alpha, mlp=None) -> torch.Tensor:
    """Softmax over the ``n`` word positions followed by the ``l`` class tokens.

    ``mlp=None`` means identity.  ``h_t`` may be one vector or a stack of them
    (``(T, d)`` gives a ``(n + l, T)`` result column-wise).
    """
    scores = pointer_scores(enc_states, enc_embeds, class_embeds, h_t, alpha, mlp)
    return torch.softmax(scores, dim=0)


class MlmHead(nn.Module):
    """One weight row per label word (yes, no, positive, negative, neutral)."""

    def __init__(self, d_model: int, n_labels: int = 5, init: torch.Tensor | None = None):
        super().__init__()
        weight = torch.empty(n_labels, d_model)
        if init is None:
            nn.init.normal_(weight, std=d_model ** -0.5)
        else:
            weight.copy_(init)
        self.weight = nn.Parameter(weight)

    def forward(self, hidden: torch.Tensor) -> torch.Tensor:
        return hidden @ self.weight.T


def mask_label_distribution(prompt_states: torch.Tensor, mask_position: int, weight: torch.Tensor) -> torch.Tensor:
    if isinstance(weight, MlmHead):
        weight = weight.weight
    h = prompt_states[mask_position]
    return torch.softmax(weight @ h, dim=0)


def index_to_token(y: int, words: Sequence[str], class_list: Sequence[Polarity] = CLASS_LIST):
    """Word for a pointer index, class token for a class index."""
    n, l = len(words), len(class_list)
    if not 1 <= y <= n + l:
        raise IndexError(f"index {y} outside [1, {n + l}]")
    if y <= n:
        return words[y - 1]
    return class_list[y - n - 1]
