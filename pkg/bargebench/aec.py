"""Normalized least-mean-squares echo canceller (the explicit-AEC baseline).

Residual echo from reverberant tails longer than the filter is left in
place; downstream models see it as-is.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .audio.wav import Waveform
from .errors import ConfigError, DegenerateSignalError, NumericError

logger = logging.getLogger(__name__)

DEFAULT_TAPS = 1024
DEFAULT_STEP = 0.5
DEFAULT_EPS = 1e-6


@dataclass
class NlmsState:
    """Adaptive filter state; ``history[0]`` is the most recent reference sample."""

    weights: np.ndarray
    history: np.ndarray
    step: float
    eps: float

    @classmethod
    def initial(cls, taps: int = DEFAULT_TAPS, step: float = DEFAULT_STEP, eps: float = DEFAULT_EPS) -> NlmsState:
        if int(taps) < 1:
            raise ConfigError("nlms_taps", f"must be >= 1, got {taps}")
        if not 0.0 < step <= 2.0:
            raise ConfigError("nlms_step", f"must be in (0, 2], got {step}")
        if not eps > 0.0:
            raise ConfigError("nlms_eps", f"must be > 0, got {eps}")
        return cls(np.zeros(int(taps)), np.zeros(int(taps)), float(step), float(eps))

    @property
    def taps(self) -> int:
        return int(self.weights.shape[0])


def nlms_process(
    mic: Waveform,
    reference: Waveform,
    taps: int = DEFAULT_TAPS,
    step: float = DEFAULT_STEP,
    eps: float = DEFAULT_EPS,
) -> Tuple[Waveform, NlmsState]:
    """Cancel the echo of ``reference`` in ``mic`` sample by sample.

    Per sample: y = w.x, e = mic[n] - y, w += step * e * x / (eps + |x|^2).
    Returns the residual e and the final state; nothing persists across calls.
    """
    state = NlmsState.initial(taps, step, eps)
    if len(mic) != len(reference):
        raise ConfigError("reference", f"length {len(reference)} != mic length {len(mic)}")
    if mic.sample_rate != reference.sample_rate:
        raise ConfigError("reference", f"sample_rate {reference.sample_rate} != mic {mic.sample_rate}")
    for name, wave in (("mic", mic), ("reference", reference)):
        if not np.all(np.isfinite(wave.samples)):
            raise NumericError(name, "non-finite input samples")

    d = mic.samples
    L = state.taps
    # reversed, zero-history reference so x_n is a contiguous slice
    padded = np.concatenate([np.zeros(L - 1), reference.samples])[::-1].copy()
    n_total = len(mic)
    w = state.weights
    residual = np.empty(n_total)
    for n in range(n_total):
        start = n_total - 1 - n
        x = padded[start:start + L]
        e = d[n] - float(np.dot(w, x))
        residual[n] = e
        norm = float(np.dot(x, x))
        if norm > 0.0:
            w += (state.step * e / (state.eps + norm)) * x
    if not np.all(np.isfinite(w)):
        raise NumericError("nlms_weights", "adaptive filter diverged to non-finite weights")
    if n_total:
        state.history = padded[:L].copy()
    logger.debug(f"nlms: {n_total} samples, L={L}, mu={state.step}")
    return Waveform(residual, mic.sample_rate), state


def erle(mic: Waveform, residual: Waveform, start: int = 0) -> float:
    """Echo return loss enhancement in dB over samples ``[start, end)``."""
    if len(mic) != len(residual):
        raise ConfigError("residual", f"length {len(residual)} != mic length {len(mic)}")
    m = mic.samples[start:]
    r = residual.samples[start:]
    p_mic = float(np.mean(m * m)) if m.size else 0.0
    if p_mic == 0.0:
        raise DegenerateSignalError("mic", "silent over the evaluated span")
    p_res = float(np.mean(r * r))
    if p_res == 0.0:
        return math.inf
    return 10.0 * math.log10(p_mic / p_res)


def misalignment_db(w_est: np.ndarray, w_true: np.ndarray) -> float:
    """10 log10(|w_est - w_true|^2 / |w_true|^2); the shorter vector is zero-padded."""
    a = np.asarray(w_est, dtype=np.float64)
    b = np.asarray(w_true, dtype=np.float64)
    n = max(a.shape[0], b.shape[0])
    a = np.pad(a, (0, n - a.shape[0]))
    b = np.pad(b, (0, n - b.shape[0]))
    ref = float(np.sum(b * b))
    if ref == 0.0:
        raise DegenerateSignalError("w_true", "all-zero true path")
    err = float(np.sum((a - b) ** 2))
    if err == 0.0:
        return -math.inf
    return 10.0 * math.log10(err / ref)


def cancel_echo(mic: Waveform, reference: Waveform, cfg: Optional[dict] = None) -> Waveform:
    """Front-end helper: NLMS residual with settings from an ``aec`` config section."""
    cfg = cfg or {}
    residual, _ = nlms_process(
        mic,
        reference,
        taps=int(cfg.get("taps", DEFAULT_TAPS)),
        step=float(cfg.get("step", DEFAULT_STEP)),
        eps=float(cfg.get("eps", DEFAULT_EPS)),
    )
    return residual
