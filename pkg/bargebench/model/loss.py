from __future__ import annotations

import numpy as np

from ..autodiff import ops
from ..autodiff.tensor import DiffTensor
from ..errors import ShapeError
from .network import ModelOutput


def loss(out: ModelOutput, y_utt, y_phon, phoneme_weight: float = 1.0) -> DiffTensor:
    """BCE(P_utt, y_utt) + phoneme_weight * mean BCE(P_phon, y_phon).

    Takes probabilities and labels only; there is no reconstruction target.
    """
    y_u = np.asarray(y_utt, dtype=np.float64)
    if y_u.size != out.p_utt.value.size:
        raise ShapeError("y_utt", f"{y_u.size} labels for {out.p_utt.value.size} predictions")
    y_u = y_u.reshape(out.p_utt.shape)
    y_p = np.asarray(y_phon, dtype=np.float64)
    if y_p.ndim == 1:
        y_p = y_p[None]
    if y_p.shape != out.p_phon.shape:
        raise ShapeError("y_phon", f"label shape {y_p.shape} != P_phon shape {out.p_phon.shape}")
    total = ops.bce_loss(out.p_utt, y_u)
    if phoneme_weight:
        total = ops.add(total, ops.scale(ops.bce_loss(out.p_phon, y_p), phoneme_weight))
    return total
