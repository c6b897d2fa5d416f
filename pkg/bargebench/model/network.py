"""The five-module masking keyword spotter.

audio encoder (shared by mixed and playback) -> refiner mask -> enhanced
embedding; text encoder; causal self-attention over [audio; text]; GRU
discriminator with utterance and phoneme heads. Every function accepts a
leading batch dimension.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..audio.features import log_mel
from ..audio.wav import Waveform
from ..autodiff import ops
from ..autodiff.tensor import DiffTensor, as_tensor
from ..errors import EmptyInputError, ShapeError
from .config import MASK_DENSE, MASK_NONE
from .params import ModelParams


@dataclass
class JointEmbedding:
    rows: DiffTensor  # (B, T_a + T_t, D)
    boundary: int

    @property
    def n_text(self) -> int:
        return self.rows.shape[1] - self.boundary


@dataclass
class ModelOutput:
    p_utt: DiffTensor   # (B,)
    p_phon: DiffTensor  # (B, T_t)


def _dense(x: DiffTensor, params: ModelParams, prefix: str) -> DiffTensor:
    return ops.add(ops.matmul(x, params[f"{prefix}.weight"]), params[f"{prefix}.bias"])


def encode_features(features: np.ndarray, params: ModelParams) -> DiffTensor:
    """(B, T_f, F) log-mel frames -> (B, stride * T_f, D) audio embedding."""
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 2:
        feats = feats[None]
    if feats.ndim != 3 or feats.shape[2] != params.config.n_mels:
        raise ShapeError("features", f"expected (B, T_f, {params.config.n_mels}), got {feats.shape}")
    b, t_f, f = feats.shape
    if t_f == 0:
        raise EmptyInputError("audio", "waveform shorter than one analysis window")
    x = DiffTensor(feats[:, None])
    x = ops.relu(ops.conv2d(x, params["audio.conv1.weight"], params["audio.conv1.bias"]))
    x = ops.relu(ops.conv2d(x, params["audio.conv2.weight"], params["audio.conv2.bias"]))
    c2 = x.shape[1]
    x = ops.reshape(ops.permute(x, (0, 2, 1, 3)), (b, t_f, c2 * f))
    x = ops.relu(_dense(x, params, "audio.proj"))
    return ops.transposed_conv1d(
        x, params["audio.upsample.weight"], params["audio.upsample.bias"], stride=params.config.upsample_stride
    )


def audio_encode(w: Waveform, params: ModelParams) -> DiffTensor:
    """Waveform -> (1, T_a, D). Mixed and playback inputs go through the same parameters."""
    return encode_features(log_mel(w, n_mels=params.config.n_mels).frames, params)


def text_encode(phoneme_ids, params: ModelParams) -> DiffTensor:
    """(B, T_t) phoneme ids -> (B, T_t, D), non-negative."""
    ids = np.asarray(phoneme_ids, dtype=np.int64)
    if ids.ndim == 1:
        ids = ids[None]
    if ids.size and (ids.min() < 0 or ids.max() >= params.config.vocab):
        raise ShapeError("phoneme_ids", f"id outside inventory [0, {params.config.vocab})")
    emb = ops.take_rows(params["text.embedding"], ids)
    return ops.relu(_dense(emb, params, "text.dense"))


def _same_shape(e_m: DiffTensor, e_p: DiffTensor, name: str) -> None:
    if e_m.shape != e_p.shape:
        raise ShapeError(name, f"{e_p.shape} != {e_m.shape}")


def refine_mask_d(e_m: DiffTensor, e_p: DiffTensor, params: ModelParams) -> DiffTensor:
    """mask[t] = sigmoid(W [E_m[t]; E_p[t]] + b), independently per frame."""
    _same_shape(e_m, e_p, "E_p")
    return ops.sigmoid(_dense(ops.concat([e_m, e_p], axis=-1), params, "refiner.dense"))


def refine_mask_c(e_m: DiffTensor, e_p: DiffTensor, params: ModelParams) -> DiffTensor:
    """Depthwise causal convolution over time of both embeddings, then sigmoid."""
    _same_shape(e_m, e_p, "E_p")
    conv_m = ops.conv1d(e_m, params["refiner.conv_mixed.weight"], causal=True, depthwise=True)
    conv_p = ops.conv1d(e_p, params["refiner.conv_playback.weight"], causal=True, depthwise=True)
    return ops.sigmoid(ops.add(ops.add(conv_m, conv_p), params["refiner.bias"]))


def apply_mask(e_m: DiffTensor, mask: DiffTensor) -> DiffTensor:
    _same_shape(e_m, mask, "mask")
    return ops.mul(e_m, mask)


def refine(e_m: DiffTensor, e_p: Optional[DiffTensor], params: ModelParams) -> DiffTensor:
    kind = params.config.mask_subnet
    if kind == MASK_NONE:
        return e_m
    if e_p is None:
        raise ShapeError("E_p", f"mask_subnet={kind} needs the playback embedding")
    mask = refine_mask_d(e_m, e_p, params) if kind == MASK_DENSE else refine_mask_c(e_m, e_p, params)
    return apply_mask(e_m, mask)


def causal_mask(n: int) -> np.ndarray:
    """Additive mask: 0 on and below the diagonal, MASK_VALUE above."""
    return np.where(np.tri(n, dtype=bool), 0.0, ops.MASK_VALUE)


def pattern_extract(
    e_a: DiffTensor, e_t: DiffTensor, params: ModelParams, return_attention: bool = False
):
    """Causal single-head self-attention over [E_a; E_t] along time."""
    e_a, e_t = as_tensor(e_a), as_tensor(e_t)
    if e_a.shape[1] == 0:
        raise EmptyInputError("E_a", "empty audio embedding")
    if e_t.shape[1] == 0:
        raise EmptyInputError("E_t", "empty keyword")
    joint = ops.concat([e_a, e_t], axis=1)
    n = joint.shape[1]
    q = _dense(joint, params, "extractor.query")
    k = _dense(joint, params, "extractor.key")
    v = _dense(joint, params, "extractor.value")
    logits = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(params.config.embed_dim))
    attn = ops.softmax(logits, axis=-1, mask=causal_mask(n))
    out = JointEmbedding(ops.matmul(attn, v), boundary=e_a.shape[1])
    return (out, attn) if return_attention else out


def discriminate(joint: JointEmbedding, params: ModelParams) -> ModelOutput:
    """GRU over all joint rows in order; last state -> P_utt, text rows -> P_phon."""
    if joint.n_text < 1:
        raise EmptyInputError("E_t", "no phoneme rows to score")
    rows = joint.rows
    b, n, d = rows.shape
    h = DiffTensor(np.zeros((b, d)))
    w_ih = params["discriminator.gru.weight_ih"]
    w_hh = params["discriminator.gru.weight_hh"]
    b_ih = params["discriminator.gru.bias_ih"]
    b_hh = params["discriminator.gru.bias_hh"]
    for t in range(n):
        x_t = ops.reshape(ops.slice_(rows, t, t + 1, axis=1), (b, d))
        h = ops.gru_cell(x_t, h, w_ih, w_hh, b_ih, b_hh)
    p_utt = ops.reshape(ops.sigmoid(_dense(h, params, "discriminator.utterance")), (b,))
    text_rows = ops.slice_(rows, joint.boundary, n, axis=1)
    p_phon = ops.reshape(ops.sigmoid(_dense(text_rows, params, "discriminator.phoneme")), (b, joint.n_text))
    return ModelOutput(p_utt, p_phon)


def forward(params: ModelParams, mixed_feats: np.ndarray, playback_feats: Optional[np.ndarray], phoneme_ids) -> ModelOutput:
    """Score a batch of equal-shape examples.

    ``mixed_feats`` and ``playback_feats`` are (B, T_f, F); both pass through
    one encoder call so they share weights by construction.
    """
    mixed = np.asarray(mixed_feats, dtype=np.float64)
    if params.config.mask_subnet == MASK_NONE:
        e_m, e_p = encode_features(mixed, params), None
    else:
        playback = np.asarray(playback_feats, dtype=np.float64)
        if playback.shape != mixed.shape:
            raise ShapeError("playback_feats", f"{playback.shape} != mixed {mixed.shape}")
        both = encode_features(np.concatenate([mixed, playback], axis=0), params)
        b = mixed.shape[0]
        e_m = ops.slice_(both, 0, b, axis=0)
        e_p = ops.slice_(both, b, 2 * b, axis=0)
    e_a = refine(e_m, e_p, params)
    e_t = text_encode(phoneme_ids, params)
    if e_t.shape[0] != e_a.shape[0]:
        raise ShapeError("phoneme_ids", f"batch {e_t.shape[0]} != audio batch {e_a.shape[0]}")
    return discriminate(pattern_extract(e_a, e_t, params), params)


