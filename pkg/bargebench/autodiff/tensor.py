"""Dense tensors with reverse-mode differentiation."""
from __future__ import annotations

from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import NumericError

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class DiffTensor:
    """A float64 array, its accumulated gradient and the op that produced it.

    ``grad`` is allocated lazily and always has the value's shape. Non-leaf
    tensors keep a reference to their parents and a backward function that
    maps the output gradient to one gradient per parent (None to skip).
    """

    __slots__ = ("value", "_grad", "requires_grad", "name", "_parents", "_backward")

    def __init__(self, value, requires_grad: bool = False, name: Optional[str] = None):
        self.value = np.array(value, dtype=np.float64)
        self._grad: Optional[np.ndarray] = None
        self.requires_grad = bool(requires_grad)
        self.name = name
        self._parents: Tuple[DiffTensor, ...] = ()
        self._backward: Optional[BackwardFn] = None

    @classmethod
    def from_op(cls, value: np.ndarray, parents: Sequence[DiffTensor], backward: BackwardFn, name: str = "op") -> DiffTensor:
        """Wrap an op result. The value must be finite."""
        out = cls(value, requires_grad=any(p.requires_grad for p in parents), name=name)
        if not np.all(np.isfinite(out.value)):
            raise NumericError(name, "forward produced non-finite values")
        if out.requires_grad:
            out._parents = tuple(parents)
            out._backward = backward
        return out

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.value.shape)

    @property
    def grad(self) -> np.ndarray:
        if self._grad is None:
            self._grad = np.zeros_like(self.value)
        return self._grad

    @grad.setter
    def grad(self, g: Optional[np.ndarray]) -> None:
        self._grad = None if g is None else np.asarray(g, dtype=np.float64)

    def zero_grad(self) -> None:
        self._grad = None

    def detach(self) -> DiffTensor:
        return DiffTensor(self.value.copy())

    def item(self) -> float:
        return float(self.value.item())

    def _topo(self) -> List[DiffTensor]:
        order: List[DiffTensor] = []
        seen = set()
        stack: List[Tuple[DiffTensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        return order

    def backward(self, grad: Optional[np.ndarray] = None) -> None:
        """Accumulate d(self)/d(leaf) into every reachable tensor's ``grad``."""
        if not self.requires_grad:
            return
        seed = np.ones_like(self.value) if grad is None else np.asarray(grad, dtype=np.float64)
        pending: Dict[int, np.ndarray] = {id(self): seed}
        for node in reversed(self._topo()):
            g = pending.pop(id(node), None)
            if g is None:
                continue
            if not node._parents:
                node.grad = node.grad + g
                continue
            parent_grads = node._backward(g)
            for p, pg in zip(node._parents, parent_grads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.value.shape:
                    raise NumericError(node.name or "op", f"gradient shape {pg.shape} != parent shape {p.value.shape}")
                if not np.all(np.isfinite(pg)):
                    raise NumericError(p.name or node.name or "op", "non-finite gradient")
                key = id(p)
                pending[key] = pending[key] + pg if key in pending else pg

    def __add__(self, other: DiffTensor) -> DiffTensor:
        from .ops import add

        return add(self, other)

    def __mul__(self, other: DiffTensor) -> DiffTensor:
        from .ops import mul

        return mul(self, other)

    def __matmul__(self, other: DiffTensor) -> DiffTensor:
        from .ops import matmul

        return matmul(self, other)

    def __repr__(self) -> str:
        return f"DiffTensor(shape={self.shape}, requires_grad={self.requires_grad}, name={self.name!r})"


def as_tensor(x) -> DiffTensor:
    return x if isinstance(x, DiffTensor) else DiffTensor(x)


def parameter(value, name: str) -> DiffTensor:
    return DiffTensor(value, requires_grad=True, name=name)
