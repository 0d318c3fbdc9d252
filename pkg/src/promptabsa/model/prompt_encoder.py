from __future__ import annotations

import torch
from torch import nn


class PromptEncoder(nn.Module):
    """Continuous embeddings for the pseudo prompt tokens.

    Position ``k`` combines a forward LSTM that has read the prefix
    ``h_0 .. h_{k-1}`` (``h_0`` is a zero start vector) with a backward LSTM
    that has read ``h_{lP} .. h_k``; an affine-ReLU-affine stack maps the
    concatenation back to the backbone width.
    """

    def __init__(self, length: int, d_model: int, hidden: int | None = None):
        super().__init__()
        if length < 1:
            raise ValueError("prompt encoder needs at least one pseudo token")
        hidden = hidden or max(1, d_model // 2)
        self.length = length
        self.d_model = d_model
        self.embedding = nn.Embedding(length, d_model)
        self.forward_lstm = nn.LSTM(d_model, hidden, batch_first=True)
        self.backward_lstm = nn.LSTM(d_model, hidden, batch_first=True)
        self.mlp = nn.Sequential(
            nn.Linear(2 * hidden, d_model),
            nn.ReLU(),
            nn.Linear(d_model, d_model),
        )

    def forward(self, pseudo_ids: torch.Tensor | None = None) -> torch.Tensor:
        if pseudo_ids is None:
            pseudo_ids = torch.arange(self.length, device=self.embedding.weight.device)
        pseudo_ids = torch.as_tensor(pseudo_ids, device=self.embedding.weight.device)
        if pseudo_ids.numel() == 0:
            raise ValueError("pseudo token list is empty")
        h = self.embedding(pseudo_ids)  # (lP, d)
        start = torch.zeros_like(h[:1])
        fwd_in = torch.cat([start, h[:-1]], dim=0).unsqueeze(0)
        fwd, _ = self.forward_lstm(fwd_in)
        bwd, _ = self.backward_lstm(h.flip(0).unsqueeze(0))
        states = torch.cat([fwd[0], bwd[0].flip(0)], dim=-1)
        return self.mlp(states)


def prompt_encoder_forward(pseudo_ids, params: PromptEncoder) -> torch.Tensor:
    return params(torch.as_tensor(list(pseudo_ids), dtype=torch.long))
