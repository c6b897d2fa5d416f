"""Log-mel front end standing in for a pretrained speech embedder."""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import librosa
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import get_window

from ..errors import ConfigError
from .wav import SAMPLE_RATE, Waveform, require_rate

N_MELS = 40
WIN_S = 0.025
HOP_S = 0.010
FEATURE_EPS = 1e-10


@dataclass(frozen=True)
class FeatureMatrix:
    """Time-major T_f x F log-mel energies."""

    frames: np.ndarray
    frame_hop: float
    frame_len: float

    @property
    def n_frames(self) -> int:
        return int(self.frames.shape[0])


def frame_count(n_samples: int, win: int, hop: int) -> int:
    if n_samples < win:
        return 0
    return 1 + (n_samples - win) // hop


@lru_cache(maxsize=8)
def _mel_basis(sample_rate: int, n_fft: int, n_mels: int) -> np.ndarray:
    # HTK mel scale, unnormalized triangles peaking at 1
    return librosa.filters.mel(
        sr=sample_rate, n_fft=n_fft, n_mels=n_mels, fmin=0.0, fmax=sample_rate / 2, htk=True, norm=None
    ).astype(np.float64)


def log_mel(w: Waveform, n_mels: int = N_MELS, win: float = WIN_S, hop: float = HOP_S) -> FeatureMatrix:
    """Hann-windowed power spectrum through a mel filterbank, then log(E + 1e-10)."""
    require_rate(w, "waveform")
    if not (win >= hop > 0):
        raise ConfigError("win", f"need win >= hop > 0, got win={win}, hop={hop}")
    win_n = int(round(win * SAMPLE_RATE))
    hop_n = int(round(hop * SAMPLE_RATE))
    n_fft = 1 << (win_n - 1).bit_length()
    t_f = frame_count(len(w), win_n, hop_n)
    if t_f == 0:
        return FeatureMatrix(np.zeros((0, n_mels)), hop, win)

    frames = sliding_window_view(w.samples, win_n)[::hop_n][:t_f]
    windowed = frames * get_window("hann", win_n, fftbins=True)
    power = np.abs(np.fft.rfft(windowed, n=n_fft, axis=1)) ** 2
    energies = power @ _mel_basis(SAMPLE_RATE, n_fft, n_mels).T
    return FeatureMatrix(np.log(energies + FEATURE_EPS), hop, win)
