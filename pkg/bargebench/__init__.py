"""
bargebench: barge-in simulation and echo-aware keyword spotting at desk scale.

This package provides:
- audio: waveforms, WAV I/O, log-mel features and a toy phoneme keyword corpus.
- room: image-source room impulse responses, the four playback scenarios and
  dataset manifests.
- aec: an NLMS echo canceller as the classical baseline.
- autodiff: a small reverse-mode tensor engine with Adam and checkpoints.
- model: the masking keyword spotter (refiner Subnet D / Subnet C) and training.
- metrics / evaluate / report: AUC, EER and MAE per scenario, with JSON, CSV
  and SVG outputs.
"""

__version__ = "0.1.0"

from .errors import BargeBenchError, ConfigError, NumericError, StorageError
from .config import Config
from .hook import JsonlLogHook, LoggingHook, PrintHook, TrainingHook
from .metrics import EvalReport, ScoredSet, auc, eer, mae, roc

__all__ = [
    "__version__",
    # Errors
    "BargeBenchError",
    "ConfigError",
    "NumericError",
    "StorageError",
    # Configuration
    "Config",
    # Hooks
    "TrainingHook",
    "JsonlLogHook",
    "LoggingHook",
    "PrintHook",
    # Metrics
    "EvalReport",
    "ScoredSet",
    "auc",
    "eer",
    "mae",
    "roc",
]
