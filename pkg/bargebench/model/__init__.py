"""The masking keyword-spotting model: network, loss, parameters and training."""
from .config import MASK_CONV, MASK_DENSE, MASK_NONE, ModelConfig, TrainConfig
from .loss import loss
from .network import (
    JointEmbedding,
    ModelOutput,
    apply_mask,
    audio_encode,
    discriminate,
    encode_features,
    forward,
    pattern_extract,
    refine_mask_c,
    refine_mask_d,
    text_encode,
)
from .params import ModelParams, param_count, param_shapes
from .train import TrainSummary, Trainer, train

__all__ = [
    "JointEmbedding",
    "MASK_CONV",
    "MASK_DENSE",
    "MASK_NONE",
    "ModelConfig",
    "ModelOutput",
    "ModelParams",
    "TrainConfig",
    "TrainSummary",
    "Trainer",
    "apply_mask",
    "audio_encode",
    "discriminate",
    "encode_features",
    "forward",
    "loss",
    "param_count",
    "param_shapes",
    "pattern_extract",
    "refine_mask_c",
    "refine_mask_d",
    "text_encode",
    "train",
]
