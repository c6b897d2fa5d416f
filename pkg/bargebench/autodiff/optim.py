"""Adam with bias correction."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping

import numpy as np

from ..errors import ConfigError, NumericError, ShapeError
from .tensor import DiffTensor

BETA1 = 0.9
BETA2 = 0.999
EPS = 1e-8
LEARNING_RATE = 1e-3


@dataclass
class AdamState:
    lr: float = LEARNING_RATE
    beta1: float = BETA1
    beta2: float = BETA2
    eps: float = EPS
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ConfigError("learning_rate", f"must be > 0, got {self.lr}")


def adam_step(params: Mapping[str, np.ndarray], grads: Mapping[str, np.ndarray], state: AdamState) -> None:
    """Update ``params`` in place.

    All gradients are checked before any parameter moves; a non-finite
    gradient aborts the whole step with NumericError naming the parameter.
    """
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeError(name, f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            bad = int(np.size(g) - np.count_nonzero(np.isfinite(g)))
            raise NumericError(name, f"non-finite gradient ({bad} entries)", {"step": state.step})
    state.step += 1
    t = state.step
    c1 = 1.0 - state.beta1 ** t
    c2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads[name]
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(p)
            v = np.zeros_like(p)
        m = state.beta1 * m + (1.0 - state.beta1) * g
        v = state.beta2 * v + (1.0 - state.beta2) * g * g
        state.m[name] = m
        state.v[name] = v
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)


class Adam:
    """Optimizer over named DiffTensor parameters; zeroes gradients after each step."""

    def __init__(self, params: Mapping[str, DiffTensor], lr: float = LEARNING_RATE, beta1: float = BETA1, beta2: float = BETA2, eps: float = EPS):
        self.params = dict(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        values = {n: t.value for n, t in self.params.items()}
        grads = {n: t.grad for n, t in self.params.items()}
        adam_step(values, grads, self.state)
        self.zero_grad()

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.zero_grad()
