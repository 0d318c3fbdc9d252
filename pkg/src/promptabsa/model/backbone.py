"""Encoder-decoder backbones behind one small interface.

``embed(ids)`` gives token embeddings (positions are added inside
``encode``/``decode`` so spliced rows get positions too), ``encode`` maps
embeddings to hidden states of the same length and ``decode`` runs the
causal decoder over a whole prefix.  Padding masks are boolean, True = pad.
"""

from __future__ import annotations

import torch
from torch import nn


class Backbone(nn.Module):
    d_model: int
    tokenizer: object

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        raise NotImplementedError

    def encode(self, embeds: torch.Tensor, pad_mask: torch.Tensor | None = None) -> torch.Tensor:
        raise NotImplementedError

    def decode(
        self,
        memory: torch.Tensor,
        memory_pad: torch.Tensor | None,
        embeds: torch.Tensor,
        pad_mask: torch.Tensor | None = None,
    ) -> torch.Tensor:
        raise NotImplementedError

    def decode_step(self, memory, memory_pad, embeds, pad_mask=None) -> torch.Tensor:
        return self.decode(memory, memory_pad, embeds, pad_mask)[:, -1]

    # token helpers
    def pieces(self, word: str) -> list[int]:
        return self.tokenizer.pieces(word)

    def word_ids(self, words) -> list[int]:
        """First piece of each word."""
        return [self.pieces(w)[0] for w in words]

    def text_ids(self, words) -> list[int]:
        out = []
        for w in words:
            out += self.pieces(w)
        return out

    @property
    def pad_id(self):
        return self.tokenizer.pad_id

    @property
    def bos_id(self):
        return self.tokenizer.bos_id

    @property
    def eos_id(self):
        return self.tokenizer.eos_id

    @property
    def mask_id(self):
        return self.tokenizer.mask_id

    @property
    def sep_id(self):
        return self.tokenizer.sep_id


def causal_mask(length: int, device=None) -> torch.Tensor:
    return torch.triu(torch.ones(length, length, dtype=torch.bool, device=device), diagonal=1)


class TinyBackbone(Backbone):
    """Small randomly initialised transformer for tests and desk-scale runs."""

    def __init__(
        self,
        tokenizer,
        d_model: int = 64,
        n_heads: int = 4,
        encoder_layers: int = 2,
        decoder_layers: int = 2,
        ffn_dim: int = 128,
        max_positions: int = 512,
        dropout: float = 0.0,
    ):
        super().__init__()
        self.tokenizer = tokenizer
        self.d_model = d_model
        self.tokens = nn.Embedding(len(tokenizer), d_model)
        self.enc_pos = nn.Embedding(max_positions, d_model)
        self.dec_pos = nn.Embedding(max_positions, d_model)
        nn.init.normal_(self.tokens.weight, std=d_model ** -0.5)
        nn.init.normal_(self.enc_pos.weight, std=0.02)
        nn.init.normal_(self.dec_pos.weight, std=0.02)
        enc_layer = nn.TransformerEncoderLayer(
            d_model, n_heads, ffn_dim, dropout, activation="gelu", batch_first=True
        )
        dec_layer = nn.TransformerDecoderLayer(
            d_model, n_heads, ffn_dim, dropout, activation="gelu", batch_first=True
        )
        self.encoder = nn.TransformerEncoder(enc_layer, encoder_layers, enable_nested_tensor=False)
        self.decoder = nn.TransformerDecoder(dec_layer, decoder_layers)

    def embed(self, ids: torch.Tensor) -> torch.Tensor:
        return self.tokens(ids)

    def encode(self, embeds, pad_mask=None):
        pos = torch.arange(embeds.shape[-2], device=embeds.device)
        x = embeds + self.enc_pos(pos)
        return self.encoder(x, src_key_padding_mask=pad_mask)

    def decode(self, memory, memory_pad, embeds, pad_mask=None):
        t = embeds.shape[-2]
        pos = torch.arange(t, device=embeds.device)
        x = embeds + self.dec_pos(pos)
        return self.decoder(
            x,
            memory,
            tgt_mask=causal_mask(t, embeds.device),
            tgt_is_causal=True,
            tgt_key_padding_mask=pad_mask,
            memory_key_padding_mask=memory_pad,
        )


class BartBackbone(Backbone):
    """Adapter over a Hugging Face ``BartModel``.

    ``tokenizer`` is anything with the ``pieces``/special-id protocol: a
    :class:`~promptabsa.model.vocab.HFWordTokenizer` for pretrained weights or
    a word-level :class:`~promptabsa.model.vocab.Vocab` for tiny configs.
    """

    def __init__(self, bart, tokenizer):
        super().__init__()
        self.bart = bart
        self.tokenizer = tokenizer
        self.d_model = bart.config.d_model

    @classmethod
    def from_pretrained(cls, name: str):
        from transformers import AutoTokenizer, BartModel

        from .vocab import HFWordTokenizer

        return cls(BartModel.from_pretrained(name), HFWordTokenizer(AutoTokenizer.from_pretrained(name)))

    @classmethod
    def from_config(cls, config: dict, tokenizer):
        from transformers import BartConfig, BartModel

        return cls(BartModel(BartConfig(**config)), tokenizer)

    def embed(self, ids):
        # BartScaledWordEmbedding applies the embedding scale itself
        return self.bart.get_input_embeddings()(ids)

    def encode(self, embeds, pad_mask=None):
        attn = None if pad_mask is None else (~pad_mask).long()
        return self.bart.encoder(inputs_embeds=embeds, attention_mask=attn).last_hidden_state

    def decode(self, memory, memory_pad, embeds, pad_mask=None):
        enc_attn = None if memory_pad is None else (~memory_pad).long()
        attn = None if pad_mask is None else (~pad_mask).long()
        return self.bart.decoder(
            inputs_embeds=embeds,
            attention_mask=attn,
            encoder_hidden_states=memory,
            encoder_attention_mask=enc_attn,
            use_cache=False,
        ).last_hidden_state
