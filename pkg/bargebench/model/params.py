"""Named parameter shapes, initialization and counting."""
from __future__ import annotations

from typing import Dict, Iterator, List, Mapping, Tuple

import numpy as np

from ..autodiff.tensor import DiffTensor
from ..errors import ConfigError
from .config import MASK_CONV, MASK_DENSE, ModelConfig

Shape = Tuple[int, ...]


def param_shapes(config: ModelConfig) -> Dict[str, Shape]:
    d = config.embed_dim
    c1, c2 = config.conv_channels
    kt, kf = config.conv_kernel
    shapes: Dict[str, Shape] = {
        "audio.conv1.weight": (c1, 1, kt, kf),
        "audio.conv1.bias": (c1,),
        "audio.conv2.weight": (c2, c1, kt, kf),
        "audio.conv2.bias": (c2,),
        "audio.proj.weight": (c2 * config.n_mels, d),
        "audio.proj.bias": (d,),
        "audio.upsample.weight": (config.upsample_stride, d, d),
        "audio.upsample.bias": (d,),
        "text.embedding": (config.vocab, d),
        "text.dense.weight": (d, d),
        "text.dense.bias": (d,),
        "extractor.query.weight": (d, d),
        "extractor.query.bias": (d,),
        "extractor.key.weight": (d, d),
        "extractor.key.bias": (d,),
        "extractor.value.weight": (d, d),
        "extractor.value.bias": (d,),
        "discriminator.gru.weight_ih": (d, 3 * d),
        "discriminator.gru.weight_hh": (d, 3 * d),
        "discriminator.gru.bias_ih": (3 * d,),
        "discriminator.gru.bias_hh": (3 * d,),
        "discriminator.utterance.weight": (d, 1),
        "discriminator.utterance.bias": (1,),
        "discriminator.phoneme.weight": (d, 1),
        "discriminator.phoneme.bias": (1,),
    }
    if config.mask_subnet == MASK_DENSE:
        shapes["refiner.dense.weight"] = (2 * d, d)
        shapes["refiner.dense.bias"] = (d,)
    elif config.mask_subnet == MASK_CONV:
        shapes["refiner.conv_mixed.weight"] = (d, config.kernel)
        shapes["refiner.conv_playback.weight"] = (d, config.kernel)
        shapes["refiner.bias"] = (d,)
    return shapes


def param_count(config: ModelConfig) -> int:
    """Exact number of trainable scalars."""
    return int(sum(int(np.prod(s)) for s in param_shapes(config).values()))


def _fans(name: str, shape: Shape) -> Tuple[int, int]:
    if len(shape) == 4:
        rf = shape[2] * shape[3]
        return shape[1] * rf, shape[0] * rf
    if len(shape) == 3:
        return shape[0] * shape[1], shape[0] * shape[2]
    if name.startswith("refiner.conv"):
        return shape[1] * 2, 1
    return shape[0], shape[1]


def init_value(name: str, shape: Shape, rng: np.random.Generator, config: ModelConfig) -> np.ndarray:
    if name.endswith("bias") or ".bias_" in name:
        return np.zeros(shape)
    if name.startswith("discriminator.gru."):
        bound = 1.0 / np.sqrt(config.embed_dim)
        return rng.uniform(-bound, bound, size=shape)
    if name == "text.embedding":
        return rng.normal(0.0, 1.0, size=shape)
    fan_in, fan_out = _fans(name, shape)
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


class ModelParams:
    """All trainable tensors, addressable by dotted name."""

    def __init__(self, config: ModelConfig, tensors: Mapping[str, DiffTensor]):
        self.config = config
        self.tensors: Dict[str, DiffTensor] = dict(tensors)

    @classmethod
    def initialize(cls, config: ModelConfig, seed: int) -> ModelParams:
        rng = np.random.default_rng(seed)
        tensors = {}
        for name, shape in sorted(param_shapes(config).items()):
            tensors[name] = DiffTensor(init_value(name, shape, rng, config), requires_grad=True, name=name)
        return cls(config, tensors)

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: Mapping[str, np.ndarray]) -> ModelParams:
        expected = param_shapes(config)
        missing = sorted(set(expected) - set(arrays))
        extra = sorted(set(arrays) - set(expected))
        if missing or extra:
            raise ConfigError(
                "checkpoint",
                f"parameters do not match mask_subnet={config.mask_subnet}: missing {missing}, unexpected {extra}",
            )
        tensors = {}
        for name, shape in expected.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != shape:
                raise ConfigError(name, f"checkpoint shape {arr.shape} != model shape {shape}")
            tensors[name] = DiffTensor(arr.copy(), requires_grad=True, name=name)
        return cls(config, tensors)

    def __getitem__(self, name: str) -> DiffTensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.tensors))

    def names(self) -> List[str]:
        return sorted(self.tensors)

    def count(self) -> int:
        return int(sum(t.value.size for t in self.tensors.values()))

    def arrays(self) -> Dict[str, np.ndarray]:
        return {n: t.value for n, t in self.tensors.items()}

    def frozen(self) -> ModelParams:
        """Copies without gradient tracking, for evaluation passes."""
        return ModelParams(self.config, {n: DiffTensor(t.value, name=n) for n, t in self.tensors.items()})

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()
