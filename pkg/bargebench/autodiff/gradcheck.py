from __future__ import annotations

from typing import Callable, Optional, Sequence, Union

import numpy as np

from ..errors import ShapeError
from .tensor import DiffTensor

STEP = 1e-5
FLOOR = 1e-8


def grad_check(
    f: Callable[..., DiffTensor],
    inputs: Union[DiffTensor, Sequence[DiffTensor]],
    h: float = STEP,
    max_coords: Optional[int] = None,
    seed: int = 0,
) -> float:
    """Max relative error between backward and central differences.

    Error per coordinate is |a - n| / max(|a|, |n|, 1e-8). ``max_coords``
    checks a random subset per input instead of every coordinate.
    """
    ts = [inputs] if isinstance(inputs, DiffTensor) else list(inputs)
    for t in ts:
        t.requires_grad = True
        t.zero_grad()
    out = f(*ts)
    if out.value.size != 1:
        raise ShapeError("f", f"gradient check needs a scalar output, got shape {out.shape}")
    out.backward()
    analytic = [t.grad.copy() for t in ts]

    rng = np.random.default_rng(seed)
    worst = 0.0
    for t, a in zip(ts, analytic):
        flat = t.value.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        a_flat = a.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(f(*ts).value)
            flat[i] = orig - h
            fm = float(f(*ts).value)
            flat[i] = orig
            num = (fp - fm) / (2.0 * h)
            err = abs(a_flat[i] - num) / max(abs(a_flat[i]), abs(num), FLOOR)
            worst = max(worst, err)
    for t in ts:
        t.zero_grad()
    return worst
