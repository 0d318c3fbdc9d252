from .backbone import Backbone, BartBackbone, TinyBackbone
from .checkpoint import load_checkpoint, save_checkpoint
from .heads import MlmHead, PointerHead, index_to_token, mask_label_distribution, pointer_distribution
from .network import ModelConfig, PromptPointerModel, build_model
from .prompt_encoder import PromptEncoder, prompt_encoder_forward
from .vocab import Vocab

__all__ = [
    "Backbone",
    "BartBackbone",
    "MlmHead",
    "ModelConfig",
    "PointerHead",
    "PromptEncoder",
    "PromptPointerModel",
    "TinyBackbone",
    "Vocab",
    "build_model",
    "index_to_token",
    "load_checkpoint",
    "mask_label_distribution",
    "pointer_distribution",
    "prompt_encoder_forward",
    "save_checkpoint",
]
