from .beam import BeamHypothesis, beam_generate, beam_search
from .losses import generation_loss, joint_loss, prompt_loss
from .trainer import TrainConfig, Trainer, predict, train

__all__ = [
    "BeamHypothesis",
    "TrainConfig",
    "Trainer",
    "beam_generate",
    "beam_search",
    "generation_loss",
    "joint_loss",
    "predict",
    "prompt_loss",
    "train",
]
