from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional, Tuple

from ..audio.features import N_MELS
from ..audio.phonemes import INVENTORY_SIZE
from ..errors import ConfigError

MASK_NONE = "none"
MASK_DENSE = "D"
MASK_CONV = "C"


@dataclass(frozen=True)
class ModelConfig:
    """Layer sizes of the masking keyword spotter.

    ``mask_subnet`` selects the refiner: "D" (per-frame dense mask), "C"
    (depthwise causal conv mask of width ``kernel``) or "none" (bypassed).
    """

    mask_subnet: str = MASK_CONV
    kernel: int = 4
    n_mels: int = N_MELS
    conv_channels: Tuple[int, int] = (8, 16)
    conv_kernel: Tuple[int, int] = (3, 3)
    embed_dim: int = 128
    upsample_stride: int = 2
    heads: int = 1
    vocab: int = INVENTORY_SIZE

    def __post_init__(self) -> None:
        object.__setattr__(self, "conv_channels", tuple(int(c) for c in self.conv_channels))
        object.__setattr__(self, "conv_kernel", tuple(int(c) for c in self.conv_kernel))
        if self.mask_subnet not in (MASK_NONE, MASK_DENSE, MASK_CONV):
            raise ConfigError("model.mask_subnet", f"expected none|D|C, got {self.mask_subnet!r}")
        if self.kernel < 1:
            raise ConfigError("model.kernel", f"must be >= 1, got {self.kernel}")
        if self.heads != 1:
            raise ConfigError("model.heads", "only single-head attention is implemented")
        if self.upsample_stride < 1 or self.embed_dim < 1 or self.n_mels < 1:
            raise ConfigError("model", "sizes must be positive")
        if len(self.conv_channels) != 2 or min(self.conv_channels) < 1:
            raise ConfigError("model.conv_channels", "need two positive channel counts")

    @classmethod
    def from_dict(cls, d: Optional[Dict[str, Any]]) -> ModelConfig:
        d = dict(d or {})
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(", ".join(f"model.{k}" for k in unknown), "unknown model setting(s)")
        return cls(**d)

    def to_dict(self) -> Dict[str, Any]:
        d = asdict(self)
        d["conv_channels"] = list(self.conv_channels)
        d["conv_kernel"] = list(self.conv_kernel)
        return d


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 5
    max_steps: Optional[int] = None
    batch_size: int = 16
    learning_rate: float = 1e-3
    validation_fraction: float = 0.2
    phoneme_weight: float = 1.0
    seed: int = 0
    aec: Dict[str, Any] = field(default_factory=lambda: {"enabled": False})

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ConfigError("train.epochs", f"must be >= 1, got {self.epochs}")
        if self.max_steps is not None and self.max_steps < 1:
            raise ConfigError("train.max_steps", f"must be >= 1, got {self.max_steps}")
        if self.batch_size < 2:
            raise ConfigError("train.batch_size", f"must be >= 2, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ConfigError("train.learning_rate", f"must be > 0, got {self.learning_rate}")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError("train.validation_fraction", f"must be in [0, 1), got {self.validation_fraction}")
        if self.phoneme_weight < 0:
            raise ConfigError("train.phoneme_weight", f"must be >= 0, got {self.phoneme_weight}")

    @property
    def aec_enabled(self) -> bool:
        return bool(self.aec.get("enabled", False))

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
