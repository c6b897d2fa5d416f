"""Minimal reverse-mode autodiff: tensors, the ops the model needs, Adam and checkpoints."""
from . import ops
from .checkpoint import checkpoint_digest, load_checkpoint, save_checkpoint
from .gradcheck import grad_check
from .optim import Adam, AdamState, adam_step
from .tensor import DiffTensor, parameter

__all__ = [
    "Adam",
    "AdamState",
    "DiffTensor",
    "adam_step",
    "checkpoint_digest",
    "grad_check",
    "load_checkpoint",
    "ops",
    "parameter",
    "save_checkpoint",
]
