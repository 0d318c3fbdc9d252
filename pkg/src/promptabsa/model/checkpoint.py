"""Checkpoint directory layout.

::

    config.json   model config + training config snapshot
    vocab.json    word vocabulary (word-level backbones only)
    model.pt      parameter state dict
    trainer.pt    optimizer / scheduler / RNG state for resuming (optional)
"""

from __future__ import annotations

import json
from pathlib import Path

import torch

from ..errors import CheckpointError
from .network import ModelConfig, PromptPointerModel, build_model
from .vocab import Vocab

DTYPES = {"float32": torch.float32, "float64": torch.float64}


def save_checkpoint(path, model: PromptPointerModel, train_config: dict | None = None, trainer_state: dict | None = None):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    meta = {
        "model": model.config.to_dict(),
        "train": train_config or {},
        "dtype": str(model.dtype).replace("torch.", ""),
    }
    (path / "config.json").write_text(json.dumps(meta, indent=2, sort_keys=True), encoding="utf-8")
    tok = model.backbone.tokenizer
    if isinstance(tok, Vocab):
        (path / "vocab.json").write_text(json.dumps(tok.to_list(), ensure_ascii=False), encoding="utf-8")
    torch.save(model.state_dict(), path / "model.pt")
    if trainer_state is not None:
        torch.save(trainer_state, path / "trainer.pt")
    return path


def load_checkpoint(path, with_trainer_state: bool = False):
    """Returns ``(model, train_config)`` or ``(model, train_config, trainer_state)``."""
    path = Path(path)
    if not (path / "config.json").exists() or not (path / "model.pt").exists():
        raise CheckpointError(f"no checkpoint at {path}")
    meta = json.loads((path / "config.json").read_text(encoding="utf-8"))
    config = ModelConfig.from_dict(meta["model"])
    vocab = None
    if (path / "vocab.json").exists():
        vocab = Vocab.from_list(json.loads((path / "vocab.json").read_text(encoding="utf-8")))
    model = build_model(config, vocab).to(DTYPES.get(meta.get("dtype", "float32"), torch.float32))
    model.load_state_dict(torch.load(path / "model.pt", weights_only=True))
    if not with_trainer_state:
        return model, meta["train"]
    state = None
    if (path / "trainer.pt").exists():
        state = torch.load(path / "trainer.pt", weights_only=False)
    return model, meta["train"], state
