"""Joint prompt + generation training loop."""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from ..core import AnnotatedSentence, SubtaskKind, TargetSequence, decode_sequence, encode_targets
from ..dataio import DatasetSplit
from ..errors import TrainingDiverged
from ..evaluation import build_report, subtasks_for
from ..model.checkpoint import DTYPES, load_checkpoint, save_checkpoint
from ..model.network import ModelConfig, PromptPointerModel, build_model
from ..model.vocab import Vocab
from ..prompting import LABEL_WORDS, PromptConfig, build_prompt_batch, get_template, label_mix, load_template_catalog, template_words
from .beam import beam_generate
from .losses import generation_loss_from_logits, joint_loss, prompt_loss_from_logits

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    subtask: str = "triplet"
    epochs: int = 50
    batch_size: int = 8
    learning_rate: float = 5e-5
    alpha1: float = 1.0
    alpha2: float = 1.0
    alpha: float = 0.5
    beam_size: int = 4
    seed: int = 42
    template: str = "auto1"
    template_catalog: str | None = None
    k_samples: int = 2
    manipulation_prob: float = 0.3
    ablate_prompt_encoder: bool = False
    warmup_ratio: float = 0.1
    weight_decay: float = 0.01
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    max_grad_norm: float | None = 5.0
    max_len: int | None = None
    eval_every: int = 1
    eval_on_train: bool = False
    stop_at_f1: float | None = None
    backbone: str = "tiny"
    pretrained: str | None = None
    d_model: int = 64
    n_heads: int = 4
    encoder_layers: int = 2
    decoder_layers: int = 2
    ffn_dim: int = 128
    dropout: float = 0.0
    dtype: str = "float32"

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 < 0:
            raise ValueError("loss weights must be non-negative")
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        SubtaskKind.parse(self.subtask)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "TrainConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def effective_template(self):
        catalog = load_template_catalog(self.template_catalog)
        # without the prompt encoder, pseudo slots fall back to the fixed manual words
        return get_template("manual" if self.ablate_prompt_encoder else self.template, catalog)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            backbone=self.backbone, pretrained=self.pretrained, d_model=self.d_model, n_heads=self.n_heads,
            encoder_layers=self.encoder_layers, decoder_layers=self.decoder_layers, ffn_dim=self.ffn_dim,
            dropout=self.dropout, alpha=self.alpha, template=self.effective_template().to_dict(),
        )


# published per-dataset settings; 16res differs in batch size and learning rate
PUBLISHED_DEFAULTS = {
    "14lap": dict(epochs=50, batch_size=8, learning_rate=5e-5, d_model=1024),
    "14res": dict(epochs=50, batch_size=8, learning_rate=5e-5, d_model=1024),
    "15res": dict(epochs=50, batch_size=8, learning_rate=5e-5, d_model=1024),
    "16res": dict(epochs=50, batch_size=32, learning_rate=1e-4, d_model=1024),
}


def default_max_len(sentences: Sequence[AnnotatedSentence]) -> int:
    return 10 * max((len(s.triplets) for s in sentences), default=1) + 2


def build_vocab(splits: Sequence[Sequence[AnnotatedSentence]], template) -> Vocab:
    extra = [w.surface for w in LABEL_WORDS] + template_words(template)
    return Vocab.build([s for split in splits for s in split], extra)


@dataclass
class EpochRecord:
    epoch: int
    l_prompt: float
    l_gen: float
    l_joint: float
    dev_f1_aesc: float | None = None
    dev_f1_pair: float | None = None
    dev_f1_triplet: float | None = None
    train_f1: float | None = None
    label_mix: dict | None = None

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class Prediction:
    sequence: TargetSequence
    triplets: set
    diagnostics: object


@torch.no_grad()
def predict(model, sentences, subtask, beam_size=4, max_len=32) -> list[Prediction]:
    subtask = SubtaskKind.parse(subtask)
    out = []
    for s in sentences:
        seq = beam_generate(model, s, beam_size, max_len, subtask)
        trips, diag = decode_sequence(s.n, seq)
        out.append(Prediction(seq, trips, diag))
    return out


def evaluate_model(model, sentences, config: TrainConfig, max_len: int, multi=False, invalid=False):
    subtask = SubtaskKind.parse(config.subtask)
    preds = predict(model, sentences, subtask, config.beam_size, max_len)
    report = build_report(
        [p.triplets for p in preds], list(sentences), subtasks_for(subtask),
        [p.sequence for p in preds], [p.diagnostics for p in preds], multi, invalid,
    )
    return report, preds


class Trainer:
    def __init__(
        self,
        config: TrainConfig,
        train: DatasetSplit | Sequence[AnnotatedSentence],
        dev: DatasetSplit | Sequence[AnnotatedSentence] | None = None,
        output_dir=None,
        model: PromptPointerModel | None = None,
    ):
        self.config = config
        self.train_set = tuple(train)
        if not self.train_set:
            raise ValueError("training split is empty")
        self.dev_set = tuple(dev) if dev is not None else ()
        self.output_dir = Path(output_dir) if output_dir else None
        self.subtask = SubtaskKind.parse(config.subtask)
        self.template = config.effective_template()
        self.prompt_config = PromptConfig(config.k_samples, config.manipulation_prob)
        self.max_len = config.max_len or default_max_len(self.train_set)
        self.targets = [list(encode_targets(s, self.subtask).indices) for s in self.train_set]

        torch.manual_seed(config.seed)
        if model is None:
            vocab = None
            if config.backbone == "tiny" or not config.pretrained:
                vocab = build_vocab([self.train_set, self.dev_set], self.template)
            model = build_model(config.model_config(), vocab)
        self.model = model.to(DTYPES[config.dtype])

        self.steps_per_epoch = math.ceil(len(self.train_set) / config.batch_size)
        self.total_steps = self.steps_per_epoch * config.epochs
        warmup = int(config.warmup_ratio * self.total_steps)
        self.optimizer = torch.optim.AdamW(
            self.model.parameters(), lr=config.learning_rate, weight_decay=config.weight_decay,
            betas=(config.adam_beta1, config.adam_beta2), eps=config.adam_eps,
        )

        def schedule(step):
            if warmup and step < warmup:
                return (step + 1) / warmup
            return max(0.0, (self.total_steps - step) / max(1, self.total_steps - warmup))

        self.scheduler = torch.optim.lr_scheduler.LambdaLR(self.optimizer, schedule)
        self.epoch = 0
        self.history: list[EpochRecord] = []
        self.best_f1 = -1.0
        self.best_epoch = 0

    # ---------------------------------------------------------------- batches
    def epoch_order(self, epoch: int) -> list[int]:
        return np.random.default_rng([self.config.seed, epoch]).permutation(len(self.train_set)).tolist()

    def prompt_samples(self, epoch: int, idx: int):
        rng = random.Random(f"{self.config.seed}:{epoch}:{idx}")
        return build_prompt_batch(self.train_set[idx], rng, self.prompt_config, self.template, idx)

    def step(self, epoch: int, batch: Sequence[int]) -> tuple[float, float, float, list]:
        cfg = self.config
        sentences = [self.train_set[i] for i in batch]
        logits, gold = self.model.generation_logits(sentences, [self.targets[i] for i in batch])
        l_gen = generation_loss_from_logits(logits, gold)

        samples, owners = [], []
        if cfg.alpha1 > 0:
            for i in batch:
                for p in self.prompt_samples(epoch, i):
                    samples.append(p)
                    owners.append(self.train_set[i])
        if samples:
            p_logits, labels = self.model.prompt_logits(owners, samples)
            l_prompt = prompt_loss_from_logits(p_logits, labels)
        else:
            l_prompt = torch.zeros((), dtype=l_gen.dtype)
        loss = joint_loss(l_prompt, l_gen, cfg.alpha1, cfg.alpha2)
        if not torch.isfinite(loss):
            snapshot = {"epoch": epoch, "batch": list(batch), "l_prompt": l_prompt.item(), "l_gen": l_gen.item()}
            if self.output_dir:
                self.output_dir.mkdir(parents=True, exist_ok=True)
                (self.output_dir / "divergence.json").write_text(json.dumps(snapshot, indent=2))
            raise TrainingDiverged(f"non-finite loss at epoch {epoch}", snapshot)
        self.optimizer.zero_grad()
        loss.backward()
        if cfg.max_grad_norm:
            torch.nn.utils.clip_grad_norm_(self.model.parameters(), cfg.max_grad_norm)
        self.optimizer.step()
        self.scheduler.step()
        return l_prompt.item(), l_gen.item(), loss.item(), samples

    def train_epoch(self, epoch: int) -> EpochRecord:
        self.model.train()
        order = self.epoch_order(epoch)
        bs = self.config.batch_size
        totals = np.zeros(3)
        all_samples = []
        for k in range(0, len(order), bs):
            batch = order[k : k + bs]
            lp, lg, lj, samples = self.step(epoch, batch)
            totals += (lp, lg, lj)
            all_samples += samples
        totals /= math.ceil(len(order) / bs)
        mix = label_mix(all_samples)
        log.debug("epoch %d prompt label mix %s", epoch, mix)
        return EpochRecord(epoch, *totals.tolist(), label_mix=mix)

    # ---------------------------------------------------------------- loop
    def fit(self, epochs: int | None = None) -> list[EpochRecord]:
        """Train up to ``epochs`` more epochs (default: until ``config.epochs``)."""
        cfg = self.config
        last = cfg.epochs if epochs is None else min(cfg.epochs, self.epoch + epochs)
        while self.epoch < last:
            self.epoch += 1
            rec = self.train_epoch(self.epoch)
            evaluate_now = self.epoch % cfg.eval_every == 0 or self.epoch == cfg.epochs
            if evaluate_now and self.dev_set:
                report, _ = evaluate_model(self.model, self.dev_set, cfg, self.max_len)
                rec.dev_f1_aesc = _f1(report, "aesc")
                rec.dev_f1_pair = _f1(report, "pair")
                rec.dev_f1_triplet = _f1(report, "triplet")
            if evaluate_now and (cfg.eval_on_train or cfg.stop_at_f1 is not None):
                report, _ = evaluate_model(self.model, self.train_set, cfg, self.max_len)
                rec.train_f1 = report.subtasks[self.subtask.value].f1
            self.history.append(rec)
            self._log(rec)
            self._select(rec)
            if cfg.stop_at_f1 is not None and rec.train_f1 is not None and rec.train_f1 >= cfg.stop_at_f1:
                break
        if self.output_dir:
            self.save(self.output_dir / "last")
        return self.history

    def _select(self, rec: EpochRecord):
        key = {"aesc": rec.dev_f1_aesc, "pair": rec.dev_f1_pair, "triplet": rec.dev_f1_triplet}[self.subtask.value]
        if key is None:
            return
        if key > self.best_f1:
            self.best_f1, self.best_epoch = key, rec.epoch
            if self.output_dir:
                self.save(self.output_dir / "best")

    def _log(self, rec: EpochRecord):
        log.info(
            "epoch %d  l_prompt %.4f  l_gen %.4f  l_joint %.4f  dev_f1 %s",
            rec.epoch, rec.l_prompt, rec.l_gen, rec.l_joint, rec.dev_f1_triplet,
        )
        if self.output_dir:
            self.output_dir.mkdir(parents=True, exist_ok=True)
            keep = ("epoch", "l_prompt", "l_gen", "l_joint", "dev_f1_aesc", "dev_f1_pair", "dev_f1_triplet")
            with open(self.output_dir / "log.jsonl", "a", encoding="utf-8") as fh:
                fh.write(json.dumps({k: getattr(rec, k) for k in keep}) + "\n")

    # ---------------------------------------------------------------- persistence
    def state(self) -> dict:
        return {
            "epoch": self.epoch,
            "optimizer": self.optimizer.state_dict(),
            "scheduler": self.scheduler.state_dict(),
            "torch_rng": torch.get_rng_state(),
            "history": [r.as_dict() for r in self.history],
            "best_f1": self.best_f1,
            "best_epoch": self.best_epoch,
            "max_len": self.max_len,
        }

    def save(self, path):
        return save_checkpoint(path, self.model, self.config.to_dict(), self.state())

    @classmethod
    def resume(cls, path, train, dev=None, output_dir=None) -> "Trainer":
        model, cfg_dict, state = load_checkpoint(path, with_trainer_state=True)
        trainer = cls(TrainConfig.from_dict(cfg_dict), train, dev, output_dir, model=model)
        if state:
            trainer.optimizer.load_state_dict(state["optimizer"])
            trainer.scheduler.load_state_dict(state["scheduler"])
            torch.set_rng_state(state["torch_rng"])
            trainer.epoch = state["epoch"]
            trainer.history = [EpochRecord(**r) for r in state["history"]]
            trainer.best_f1 = state["best_f1"]
            trainer.best_epoch = state["best_epoch"]
            trainer.max_len = state["max_len"]
        return trainer


def _f1(report, name):
    s = report.subtasks.get(name)
    return None if s is None else s.f1


def train(model, datasets, config: TrainConfig, output_dir=None) -> Trainer:
    """Run the full loop; ``datasets`` maps split names to sentences."""
    trainer = Trainer(config, datasets["train"], datasets.get("dev"), output_dir, model)
    trainer.fit()
    return trainer
