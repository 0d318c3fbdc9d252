"""The full model: shared encoder, pointer generation head and prompt MLM head.

Candidate columns of the generation logits are laid out as
``[word_1 .. word_{n_max}, class_1 .. class_l, end]``; word columns beyond a
sentence's own length are masked to ``-inf``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import torch
from torch import nn

from ..core import CLASS_COUNT, AnnotatedSentence
from ..errors import AssemblyError, CodecInputError
from ..prompting import LABEL_WORDS, PRESET_TEMPLATES, PromptSample, Template
from .backbone import Backbone, BartBackbone, TinyBackbone
from .heads import MlmHead, PointerHead
from .prompt_encoder import PromptEncoder

IGNORE = -100


@dataclass
class ModelConfig:
    backbone: str = "tiny"
    pretrained: str | None = None
    d_model: int = 64
    n_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_dim: int = 128
    max_positions: int = 512
    dropout: float = 0.0
    alpha: float = 0.5
    prompt_hidden: int | None = None
    template: dict = field(default_factory=lambda: PRESET_TEMPLATES["auto1"].to_dict())
    # filled in for tiny BART configs so a checkpoint can rebuild the architecture
    bart_config: dict | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in d.items() if k in known})


@dataclass
class EncoderState:
    hidden: torch.Tensor       # (B, T, d) all encoder positions
    pad: torch.Tensor          # (B, T) True = pad
    word_hidden: torch.Tensor  # (B, n_max, d) first-piece states
    word_embeds: torch.Tensor  # (B, n_max, d) first-piece embeddings
    word_mask: torch.Tensor    # (B, n_max) True = real word
    word_token_ids: torch.Tensor  # (B, n_max)
    lengths: list[int]

    @property
    def n_max(self) -> int:
        return self.word_mask.shape[1]

    def select(self, b: int, repeat: int = 1) -> "EncoderState":
        n = self.lengths[b]

        def pick(t, trim=None):
            t = t[b : b + 1]
            if trim is not None:
                t = t[:, :trim]
            return t.expand(repeat, *t.shape[1:])

        return EncoderState(
            pick(self.hidden), pick(self.pad), pick(self.word_hidden, n), pick(self.word_embeds, n),
            pick(self.word_mask, n), pick(self.word_token_ids, n), [n] * repeat,
        )


class PromptPointerModel(nn.Module):
    def __init__(self, backbone: Backbone, config: ModelConfig | None = None):
        super().__init__()
        self.config = config or ModelConfig()
        self.backbone = backbone
        d = backbone.d_model
        self.template = Template.from_dict(self.config.template)
        self.prompt_encoder = PromptEncoder(max(1, self.template.pseudo_count), d, self.config.prompt_hidden)
        self.pointer_head = PointerHead(d, self.config.alpha)
        self.class_words = tuple(w.surface for w in LABEL_WORDS[2:])
        self.register_buffer(
            "class_token_ids", torch.tensor([backbone.word_ids([w])[0] for w in self.class_words]), persistent=False
        )
        label_ids = torch.tensor([backbone.word_ids([w.surface])[0] for w in LABEL_WORDS])
        with torch.no_grad():
            init = backbone.embed(label_ids).detach().clone()
        self.mlm_head = MlmHead(d, len(LABEL_WORDS), init)

    @property
    def device(self):
        return self.mlm_head.weight.device

    @property
    def dtype(self):
        return self.mlm_head.weight.dtype

    # ------------------------------------------------------------------ encoder
    def tokenize(self, words: Sequence[str]) -> tuple[list[int], list[int]]:
        """Piece ids of ``<s> words </s>`` and the position of each word's first piece."""
        ids, starts = [self.backbone.bos_id], []
        for w in words:
            starts.append(len(ids))
            ids += self.backbone.pieces(w)
        ids.append(self.backbone.eos_id)
        return ids, starts

    def encode(self, sentences: Sequence[AnnotatedSentence]) -> EncoderState:
        toks = [self.tokenize(s.words) for s in sentences]
        ids = _pad([t[0] for t in toks], self.backbone.pad_id, self.device)
        lengths = [len(t[1]) for t in toks]
        pad = _length_mask([len(t[0]) for t in toks], ids.shape[1], self.device).logical_not()
        starts = _pad([t[1] for t in toks], 0, self.device)
        word_mask = _length_mask(lengths, starts.shape[1], self.device)
        embeds = self.backbone.embed(ids)
        hidden = self.backbone.encode(embeds, pad)
        gather = starts.unsqueeze(-1).expand(-1, -1, hidden.shape[-1])
        return EncoderState(
            hidden,
            pad,
            torch.gather(hidden, 1, gather),
            torch.gather(embeds, 1, gather),
            word_mask,
            torch.gather(ids, 1, starts),
            lengths,
        )

    # ------------------------------------------------------------------ decoder
    def index_token_id(self, state: EncoderState, b: int, y: int) -> int:
        """Token fed back to the decoder for index ``y``: the word, or the class token."""
        n = state.lengths[b]
        if not 1 <= y <= n + CLASS_COUNT:
            raise CodecInputError(f"index {y} outside [1, {n + CLASS_COUNT}]")
        if y <= n:
            return int(state.word_token_ids[b, y - 1])
        return int(self.class_token_ids[y - n - 1])

    def decoder_inputs(self, state: EncoderState, prefixes: Sequence[Sequence[int]]):
        rows = [
            [self.backbone.bos_id] + [self.index_token_id(state, b, y) for y in prefix]
            for b, prefix in enumerate(prefixes)
        ]
        ids = _pad(rows, self.backbone.pad_id, self.device)
        pad = _length_mask([len(r) for r in rows], ids.shape[1], self.device).logical_not()
        return ids, pad

    def candidate_logits(self, state: EncoderState, dec_hidden: torch.Tensor) -> torch.Tensor:
        blended = self.pointer_head.blend(state.word_hidden, state.word_embeds)
        extra = self.backbone.embed(
            torch.cat([self.class_token_ids, torch.tensor([self.backbone.eos_id], device=self.device)])
        )
        cand = torch.cat([blended, extra.unsqueeze(0).expand(blended.shape[0], -1, -1)], dim=1)
        logits = torch.einsum("btd,bkd->btk", dec_hidden, cand)
        word_ok = torch.cat(
            [state.word_mask, torch.ones(state.word_mask.shape[0], CLASS_COUNT + 1, dtype=torch.bool, device=self.device)],
            dim=1,
        )
        return logits.masked_fill(~word_ok.unsqueeze(1), float("-inf"))

    def decode_logits(self, state: EncoderState, prefixes: Sequence[Sequence[int]]) -> torch.Tensor:
        """Logits for every step of each prefix (teacher forcing); ``(B, T+1, n_max+l+1)``."""
        dec_ids, dec_pad = self.decoder_inputs(state, prefixes)
        h = self.backbone.decode(state.hidden, state.pad, self.backbone.embed(dec_ids), dec_pad)
        return self.candidate_logits(state, h)

    def gold_columns(self, state: EncoderState, targets: Sequence[Sequence[int]]) -> torch.Tensor:
        """Column index of every gold step, end token appended, padded with ``IGNORE``."""
        n_max = state.n_max
        rows = []
        for b, seq in enumerate(targets):
            n = state.lengths[b]
            rows.append([y - 1 if y <= n else n_max + (y - n - 1) for y in seq] + [n_max + CLASS_COUNT])
        return _pad(rows, IGNORE, self.device)

    def generation_logits(self, sentences, targets: Sequence[Sequence[int]]):
        state = self.encode(sentences)
        logits = self.decode_logits(state, targets)
        return logits, self.gold_columns(state, targets)

    def step_log_probs(self, state: EncoderState, prefixes: Sequence[Sequence[int]]) -> torch.Tensor:
        """Next-index log-probabilities for prefixes of one sentence.

        ``state`` must hold that sentence repeated ``len(prefixes)`` times.
        Column ``y - 1`` is index ``y``; the last column is the end token.
        """
        logits = self.decode_logits(state, prefixes)
        last = torch.tensor([len(p) for p in prefixes], device=self.device)
        step = logits[torch.arange(len(prefixes), device=self.device), last]
        return torch.log_softmax(step, dim=-1)

    def generation_step(self, sentence: AnnotatedSentence, prefix: Sequence[int], state=None) -> torch.Tensor:
        """Distribution of the next index given the decoded prefix (``n + l + 1`` entries)."""
        state = state or self.encode([sentence])
        return self.step_log_probs(state.select(0), [list(prefix)])[0].exp()

    # ------------------------------------------------------------------ prompts
    def prompt_layout_ids(self, sentence: AnnotatedSentence, sample: PromptSample):
        """Ids of ``<s> sentence <sep> layout </s>`` with pseudo/mask bookkeeping.

        Returns ``(ids, pseudo, masks)`` where ``pseudo[i]`` is the 1-based
        pseudo index at position ``i`` (0 elsewhere).
        """
        ids, _ = self.tokenize(sentence.words)
        ids = ids[:-1] + [self.backbone.sep_id]
        pseudo = [0] * len(ids)
        masks = []
        for slot in sample.token_layout:
            if slot.kind == "pseudo":
                ids.append(self.backbone.pad_id)
                pseudo.append(int(slot.value))
                continue
            if slot.kind == "mask":
                masks.append(len(ids))
                piece = [self.backbone.mask_id]
            elif slot.kind in ("aspect", "opinion"):
                piece = self.backbone.text_ids(slot.value)
            else:
                piece = self.backbone.text_ids([slot.value])
            ids += piece
            pseudo += [0] * len(piece)
        ids.append(self.backbone.eos_id)
        pseudo.append(0)
        return ids, pseudo, masks

    def assemble_prompt_input(self, sentence, sample: PromptSample, h_prime: torch.Tensor):
        """Encoder input rows for one prompt sample.

        Returns ``(embeds, mask_positions, pseudo_positions)``.
        """
        ids, pseudo, masks = self.prompt_layout_ids(sentence, sample)
        if max(pseudo, default=0) > h_prime.shape[0]:
            raise AssemblyError(f"layout uses P{max(pseudo)} but only {h_prime.shape[0]} prompt rows given")
        embeds = self._splice(
            torch.tensor([ids], device=self.device), torch.tensor([pseudo], device=self.device), h_prime
        )[0]
        return embeds, masks, [i for i, k in enumerate(pseudo) if k]

    def _splice(self, ids: torch.Tensor, pseudo: torch.Tensor, h_prime: torch.Tensor) -> torch.Tensor:
        tok = self.backbone.embed(ids)
        if not bool((pseudo > 0).any()):
            return tok
        rows = h_prime[(pseudo - 1).clamp(min=0)]
        return torch.where((pseudo > 0).unsqueeze(-1), rows, tok)

    def prompt_logits(self, sentences: Sequence[AnnotatedSentence], samples: Sequence[PromptSample]):
        """Label-word logits at every mask position; ``samples[i]`` belongs to ``sentences[i]``."""
        h_prime = self.prompt_encoder()
        built = [self.prompt_layout_ids(s, p) for s, p in zip(sentences, samples)]
        for _, pseudo, _ in built:
            if max(pseudo, default=0) > h_prime.shape[0]:
                raise AssemblyError("template needs more pseudo tokens than the prompt encoder holds")
        ids = _pad([b[0] for b in built], self.backbone.pad_id, self.device)
        pseudo = _pad([b[1] for b in built], 0, self.device)
        pad = _length_mask([len(b[0]) for b in built], ids.shape[1], self.device).logical_not()
        hidden = self.backbone.encode(self._splice(ids, pseudo, h_prime), pad)
        rows = torch.tensor([i for i, b in enumerate(built) for _ in b[2]], device=self.device)
        cols = torch.tensor([m for b in built for m in b[2]], device=self.device)
        labels = torch.tensor([lab.index for p in samples for lab in p.mask_labels], device=self.device)
        return self.mlm_head(hidden[rows, cols]), labels


def _pad(rows: Sequence[Sequence[int]], value: int, device) -> torch.Tensor:
    width = max((len(r) for r in rows), default=0)
    return torch.tensor([list(r) + [value] * (width - len(r)) for r in rows], dtype=torch.long, device=device)


def _length_mask(lengths: Sequence[int], width: int, device) -> torch.Tensor:
    return torch.arange(width, device=device).unsqueeze(0) < torch.tensor(lengths, device=device).unsqueeze(1)


def build_backbone(config: ModelConfig, tokenizer=None) -> Backbone:
    if config.backbone == "tiny":
        if tokenizer is None:
            raise ValueError("the tiny backbone needs a vocabulary")
        return TinyBackbone(
            tokenizer, config.d_model, config.n_heads, config.encoder_layers, config.decoder_layers,
            config.ffn_dim, config.max_positions, config.dropout,
        )
    if config.backbone == "bart":
        if config.pretrained:
            bb = BartBackbone.from_pretrained(config.pretrained)
            config.d_model = bb.d_model
            return bb
        if tokenizer is None:
            raise ValueError("a randomly initialised BART needs a vocabulary")
        bart_cfg = config.bart_config or dict(
            d_model=config.d_model,
            encoder_layers=config.encoder_layers,
            decoder_layers=config.decoder_layers,
            encoder_attention_heads=config.n_heads,
            decoder_attention_heads=config.n_heads,
            encoder_ffn_dim=config.ffn_dim,
            decoder_ffn_dim=config.ffn_dim,
            max_position_embeddings=config.max_positions,
            dropout=config.dropout,
            attention_dropout=config.dropout,
            activation_dropout=config.dropout,
        )
        bart_cfg = dict(bart_cfg, vocab_size=len(tokenizer), pad_token_id=tokenizer.pad_id,
                        bos_token_id=tokenizer.bos_id, eos_token_id=tokenizer.eos_id)
        config.bart_config = bart_cfg
        return BartBackbone.from_config(bart_cfg, tokenizer)
    raise ValueError(f"unknown backbone {config.backbone!r}")


def build_model(config: ModelConfig, tokenizer=None) -> PromptPointerModel:
    return PromptPointerModel(build_backbone(config, tokenizer), config)

