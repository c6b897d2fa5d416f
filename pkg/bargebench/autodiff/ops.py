"""Differentiable ops.

Ops take and return DiffTensor and accept a leading batch dimension where
noted. Shapes are checked up front; violations raise ShapeError naming the
operand.
"""
from __future__ import annotations

from typing import Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from ..errors import ShapeError
from .tensor import DiffTensor, as_tensor

MASK_VALUE = -1e30
PROB_CLIP = 1e-7


def _unbroadcast(g: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``g`` down to ``shape`` after numpy broadcasting."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _check_broadcast(a: DiffTensor, b: DiffTensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(op, f"cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return DiffTensor.from_op(a.value + b.value, (a, b), backward, "add")


def mul(a, b) -> DiffTensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return DiffTensor.from_op(a.value * b.value, (a, b), backward, "mul")


def scale(x, factor: float, shift: float = 0.0) -> DiffTensor:
    """factor * x + shift with constants."""
    x = as_tensor(x)
    return DiffTensor.from_op(factor * x.value + shift, (x,), lambda g: (factor * g,), "scale")


def matmul(a, b) -> DiffTensor:
    """Batched matrix product; a 2-D right operand is shared across the batch."""
    a, b = as_tensor(a), as_tensor(b)
    if a.value.ndim < 2 or b.value.ndim < 2:
        raise ShapeError("matmul", f"operands must be at least 2-D, got {a.shape} and {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError("matmul", f"inner dims differ: {a.shape} @ {b.shape} ({a.shape[-1]} != {b.shape[-2]})")

    def backward(g):
        ga = g @ np.swapaxes(b.value, -1, -2)
        gb = np.swapaxes(a.value, -1, -2) @ g
        return _unbroadcast(ga, a.shape), _unbroadcast(gb, b.shape)

    return DiffTensor.from_op(a.value @ b.value, (a, b), backward, "matmul")


def sigmoid(x) -> DiffTensor:
    x = as_tensor(x)
    out = expit(x.value)
    return DiffTensor.from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def relu(x) -> DiffTensor:
    x = as_tensor(x)
    out = np.maximum(x.value, 0.0)
    return DiffTensor.from_op(out, (x,), lambda g: (g * (x.value > 0),), "relu")


def tanh(x) -> DiffTensor:
    x = as_tensor(x)
    out = np.tanh(x.value)
    return DiffTensor.from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def softmax(x, axis: int = -1, mask: Optional[np.ndarray] = None) -> DiffTensor:
    """Softmax with an optional additive mask.

    ``mask`` must match the trailing dims of ``x``; entries at or below
    MASK_VALUE / 2 get probability exactly 0.
    """
    x = as_tensor(x)
    z = x.value
    masked = None
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.ndim > z.ndim or z.shape[z.ndim - mask.ndim:] != mask.shape:
            raise ShapeError("mask", f"mask shape {mask.shape} does not match trailing dims of {x.shape}")
        z = z + mask
        masked = np.broadcast_to(mask <= MASK_VALUE / 2, z.shape)
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    if masked is not None:
        e = np.where(masked, 0.0, e)
    p = e / np.sum(e, axis=axis, keepdims=True)

    def backward(g):
        return (p * (g - np.sum(g * p, axis=axis, keepdims=True)),)

    return DiffTensor.from_op(p, (x,), backward, "softmax")


def concat(tensors: Sequence[DiffTensor], axis: int = 0) -> DiffTensor:
    ts = [as_tensor(t) for t in tensors]
    if not ts:
        raise ShapeError("concat", "no operands")
    ref = list(ts[0].shape)
    nd = len(ref)
    ax = axis % nd
    for t in ts[1:]:
        s = list(t.shape)
        if len(s) != nd or s[:ax] + s[ax + 1:] != ref[:ax] + ref[ax + 1:]:
            raise ShapeError("concat", f"shapes {ts[0].shape} and {t.shape} differ off axis {axis}")
    bounds = np.cumsum([t.shape[ax] for t in ts])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=ax))

    return DiffTensor.from_op(np.concatenate([t.value for t in ts], axis=ax), ts, backward, "concat")


def slice_(x, start: int, stop: int, axis: int = 0) -> DiffTensor:
    x = as_tensor(x)
    ax = axis % x.value.ndim
    n = x.shape[ax]
    if not 0 <= start <= stop <= n:
        raise ShapeError("slice", f"[{start}:{stop}] out of range for axis {axis} of size {n}")
    idx = [slice(None)] * x.value.ndim
    idx[ax] = slice(start, stop)
    idx = tuple(idx)

    def backward(g):
        out = np.zeros_like(x.value)
        out[idx] = g
        return (out,)

    return DiffTensor.from_op(x.value[idx], (x,), backward, "slice")


def transpose(x) -> DiffTensor:
    """Swap the last two axes."""
    x = as_tensor(x)
    return DiffTensor.from_op(np.swapaxes(x.value, -1, -2), (x,), lambda g: (np.swapaxes(g, -1, -2),), "transpose")


def reshape(x, shape: Sequence[int]) -> DiffTensor:
    x = as_tensor(x)
    try:
        out = x.value.reshape(tuple(shape))
    except ValueError:
        raise ShapeError("reshape", f"cannot reshape {x.shape} to {tuple(shape)}") from None
    return DiffTensor.from_op(out, (x,), lambda g: (g.reshape(x.shape),), "reshape")


def permute(x, axes: Sequence[int]) -> DiffTensor:
    x = as_tensor(x)
    axes = tuple(axes)
    if sorted(axes) != list(range(x.value.ndim)):
        raise ShapeError("permute", f"axes {axes} are not a permutation for {x.shape}")
    inverse = tuple(np.argsort(axes))
    return DiffTensor.from_op(np.transpose(x.value, axes), (x,), lambda g: (np.transpose(g, inverse),), "permute")


def take_rows(table, ids) -> DiffTensor:
    """Embedding lookup: ``table[ids]`` for an integer index array of any shape."""
    table = as_tensor(table)
    ids = np.asarray(ids, dtype=np.int64)
    n = table.shape[0]
    if ids.size and (ids.min() < 0 or ids.max() >= n):
        raise ShapeError("ids", f"index outside [0, {n})")

    def backward(g):
        out = np.zeros_like(table.value)
        np.add.at(out, ids, g)
        return (out,)

    return DiffTensor.from_op(table.value[ids], (table,), backward, "take_rows")


def sum_(x, axis: Optional[int] = None) -> DiffTensor:
    x = as_tensor(x)
    out = np.sum(x.value, axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, x.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), x.shape).copy(),)

    return DiffTensor.from_op(out, (x,), backward, "sum")


def mean(x, axis: Optional[int] = None) -> DiffTensor:
    x = as_tensor(x)
    n = x.value.size if axis is None else x.shape[axis]
    return scale(sum_(x, axis), 1.0 / max(n, 1))


def _causal_windows(v: np.ndarray, k: int, left: int) -> np.ndarray:
    """(B, T, C) -> (B, T, k, C) windows over a left-padded time axis."""
    t = v.shape[1]
    vp = np.pad(v, ((0, 0), (left, k - 1 - left), (0, 0)))
    win = sliding_window_view(vp, k, axis=1)  # (B, T, C, k)
    return np.moveaxis(win, -1, 2)[:, :t]


def _scatter_windows(gwin: np.ndarray, t: int, k: int, left: int) -> np.ndarray:
    b, _, _, c = gwin.shape
    gp = np.zeros((b, t + k - 1, c))
    for j in range(k):
        gp[:, j:j + t] += gwin[:, :, j]
    return gp[:, left:left + t]


def conv1d(x, w, bias=None, causal: bool = True, depthwise: bool = False) -> DiffTensor:
    """Convolution over time for (B, T, C) inputs.

    Full: ``w`` is (K, C_in, C_out), out[t] = sum_k x[t-k] @ w[k].
    Depthwise: ``w`` is (C, K), out[t, c] = sum_k w[c, k] x[t-k, c].
    Causal pads K-1 zeros of history; otherwise the window is centred.
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.value.ndim != 3:
        raise ShapeError("conv1d", f"input must be (B, T, C), got {x.shape}")
    b_, t, c = x.shape
    if depthwise:
        if w.value.ndim != 2 or w.shape[0] != c:
            raise ShapeError("conv1d", f"depthwise kernel must be ({c}, K), got {w.shape}")
        k = w.shape[1]
        wr = w.value[:, ::-1].T  # (K, C), row j multiplies x[t - (K-1-j)] when causal
    else:
        if w.value.ndim != 3 or w.shape[1] != c:
            raise ShapeError("conv1d", f"kernel must be (K, {c}, C_out), got {w.shape}")
        k = w.shape[0]
        wr = w.value[::-1]
    if k < 1:
        raise ShapeError("conv1d", "kernel width must be >= 1")
    left = k - 1 if causal else (k - 1) // 2
    win = _causal_windows(x.value, k, left)
    out = np.einsum("btjc,jc->btc", win, wr) if depthwise else np.einsum("btjc,jco->bto", win, wr, optimize=True)
    parents = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (out.shape[-1],):
            raise ShapeError("bias", f"expected ({out.shape[-1]},), got {bias.shape}")
        out = out + bias.value
        parents.append(bias)

    def backward(g):
        if depthwise:
            gwr = np.einsum("btjc,btc->jc", win, g)
            gw = gwr[::-1].T
            gwin = g[:, :, None, :] * wr[None, None]
        else:
            gwr = np.einsum("btjc,bto->jco", win, g, optimize=True)
            gw = gwr[::-1]
            gwin = np.einsum("bto,jco->btjc", g, wr, optimize=True)
        gx = _scatter_windows(gwin, t, k, left)
        grads = [gx, np.ascontiguousarray(gw)]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return grads

    return DiffTensor.from_op(out, parents, backward, "conv1d")


def conv2d(x, w, bias=None) -> DiffTensor:
    """2-D convolution, causal along time and 'same' along frequency.

    ``x`` is (B, C_in, T, F), ``w`` is (C_out, C_in, kT, kF); output is
    (B, C_out, T, F).
    """
    x, w = as_tensor(x), as_tensor(w)
    if x.value.ndim != 4 or w.value.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ShapeError("conv2d", f"input (B, C, T, F) {x.shape} vs kernel (O, C, kT, kF) {w.shape}")
    _, _, t, f = x.shape
    _, _, kt, kf = w.shape
    top = kt - 1
    lf = (kf - 1) // 2
    xp = np.pad(x.value, ((0, 0), (0, 0), (top, 0), (lf, kf - 1 - lf)))
    win = sliding_window_view(xp, (kt, kf), axis=(2, 3))  # (B, C, T, F, kT, kF)
    out = np.tensordot(win, w.value, axes=([1, 4, 5], [1, 2, 3]))  # (B, T, F, O)
    out = np.ascontiguousarray(np.moveaxis(out, -1, 1))
    parents = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (w.shape[0],):
            raise ShapeError("bias", f"expected ({w.shape[0]},), got {bias.shape}")
        out = out + bias.value[None, :, None, None]
        parents.append(bias)

    def backward(g):
        gw = np.tensordot(g, win, axes=([0, 2, 3], [0, 2, 3]))  # (O, C, kT, kF)
        gwin = np.tensordot(g, w.value, axes=([1], [0]))  # (B, T, F, C, kT, kF)
        gxp = np.zeros_like(xp)
        for i in range(kt):
            for j in range(kf):
                gxp[:, :, i:i + t, j:j + f] += np.moveaxis(gwin[..., i, j], -1, 1)
        grads = [gxp[:, :, top:, lf:lf + f], gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return grads

    return DiffTensor.from_op(out, parents, backward, "conv2d")


def transposed_conv1d(x, w, bias=None, stride: int = 2) -> DiffTensor:
    """Upsampling over time: out[t*stride + k] += x[t] @ w[k].

    ``x`` is (B, T, C_in), ``w`` is (K, C_in, C_out); the output has
    (T - 1) * stride + K rows, i.e. stride * T when K == stride.
    """
    x, w = as_tensor(x), as_tensor(w)
    if stride < 1:
        raise ShapeError("stride", f"must be >= 1, got {stride}")
    if x.value.ndim != 3 or w.value.ndim != 3 or x.shape[2] != w.shape[1]:
        raise ShapeError("transposed_conv1d", f"input (B, T, C) {x.shape} vs kernel (K, C, O) {w.shape}")
    b_, t, _ = x.shape
    k, _, o = w.shape
    n_out = (t - 1) * stride + k if t else 0
    contrib = np.einsum("btc,kco->btko", x.value, w.value, optimize=True)
    out = np.zeros((b_, n_out, o))
    for j in range(k):
        out[:, j:j + (t - 1) * stride + 1:stride] += contrib[:, :, j]
    parents = [x, w]
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (o,):
            raise ShapeError("bias", f"expected ({o},), got {bias.shape}")
        out = out + bias.value
        parents.append(bias)

    def backward(g):
        gc = np.stack([g[:, j:j + (t - 1) * stride + 1:stride] for j in range(k)], axis=2)  # (B, T, K, O)
        gx = np.einsum("btko,kco->btc", gc, w.value, optimize=True)
        gw = np.einsum("btc,btko->kco", x.value, gc, optimize=True)
        grads = [gx, gw]
        if bias is not None:
            grads.append(g.sum(axis=(0, 1)))
        return grads

    return DiffTensor.from_op(out, parents, backward, "transposed_conv1d")


def gru_cell(x, h, w_ih, w_hh, b_ih, b_hh) -> DiffTensor:
    """One GRU step for (B, I) input and (B, H) state.

    Gate blocks along the 3H axis are ordered update, reset, candidate:
    z = s(x W_iz + b_iz + h W_hz + b_hz), r likewise,
    n = tanh(x W_in + b_in + r * (h W_hn + b_hn)), h' = (1 - z) n + z h.
    """
    x, h, w_ih, w_hh, b_ih, b_hh = (as_tensor(v) for v in (x, h, w_ih, w_hh, b_ih, b_hh))
    hid = h.shape[-1]
    if w_ih.shape != (x.shape[-1], 3 * hid) or w_hh.shape != (hid, 3 * hid):
        raise ShapeError("gru_cell", f"weights {w_ih.shape}, {w_hh.shape} do not fit input {x.shape}, state {h.shape}")
    if b_ih.shape != (3 * hid,) or b_hh.shape != (3 * hid,):
        raise ShapeError("gru_cell", f"biases must be ({3 * hid},)")
    if x.shape[:-1] != h.shape[:-1]:
        raise ShapeError("gru_cell", f"batch dims differ: {x.shape} vs {h.shape}")

    gi = x.value @ w_ih.value + b_ih.value
    gh = h.value @ w_hh.value + b_hh.value
    z = expit(gi[..., :hid] + gh[..., :hid])
    r = expit(gi[..., hid:2 * hid] + gh[..., hid:2 * hid])
    gh_n = gh[..., 2 * hid:]
    n = np.tanh(gi[..., 2 * hid:] + r * gh_n)
    out = (1.0 - z) * n + z * h.value

    def backward(g):
        dz = g * (h.value - n)
        dn = g * (1.0 - z)
        dn_pre = dn * (1.0 - n * n)
        dr = dn_pre * gh_n
        dz_pre = dz * z * (1.0 - z)
        dr_pre = dr * r * (1.0 - r)
        dgi = np.concatenate([dz_pre, dr_pre, dn_pre], axis=-1)
        dgh = np.concatenate([dz_pre, dr_pre, dn_pre * r], axis=-1)
        dx = dgi @ w_ih.value.T
        dh = g * z + dgh @ w_hh.value.T
        x2 = x.value.reshape(-1, x.shape[-1])
        h2 = h.value.reshape(-1, hid)
        dw_ih = x2.T @ dgi.reshape(-1, 3 * hid)
        dw_hh = h2.T @ dgh.reshape(-1, 3 * hid)
        return dx, dh, dw_ih, dw_hh, dgi.reshape(-1, 3 * hid).sum(axis=0), dgh.reshape(-1, 3 * hid).sum(axis=0)

    return DiffTensor.from_op(out, (x, h, w_ih, w_hh, b_ih, b_hh), backward, "gru_cell")


def bce_loss(p, y) -> DiffTensor:
    """Mean binary cross-entropy of probabilities ``p`` against labels ``y``.

    ``p`` is clipped to [1e-7, 1 - 1e-7]; clipped entries pass no gradient.
    """
    p = as_tensor(p)
    y = np.asarray(y.value if isinstance(y, DiffTensor) else y, dtype=np.float64)
    if y.shape != p.shape:
        raise ShapeError("labels", f"label shape {y.shape} != prediction shape {p.shape}")
    if p.value.size == 0:
        raise ShapeError("bce_loss", "empty prediction")
    pc = np.clip(p.value, PROB_CLIP, 1.0 - PROB_CLIP)
    n = p.value.size
    loss = -np.mean(y * np.log(pc) + (1.0 - y) * np.log(1.0 - pc))
    inside = (p.value >= PROB_CLIP) & (p.value <= 1.0 - PROB_CLIP)

    def backward(g):
        return (g * inside * (pc - y) / (pc * (1.0 - pc)) / n,)

    return DiffTensor.from_op(np.asarray(loss), (p,), backward, "bce_loss")
