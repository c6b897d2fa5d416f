"""Waveform container and 16-bit PCM WAV I/O."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
import soundfile as sf

from ..errors import ConfigError, FormatError, StorageError

SAMPLE_RATE = 16000
PCM_SCALE = 32768.0

PathLike = Union[str, Path]


@dataclass(frozen=True)
class Waveform:
    """Mono audio. ``samples`` are float64 amplitudes, nominally in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int = SAMPLE_RATE

    def __post_init__(self) -> None:
        samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        if samples.ndim != 1:
            raise ConfigError("samples", f"expected a 1-D array, got shape {samples.shape}")
        if int(self.sample_rate) <= 0:
            raise ConfigError("sample_rate", f"must be positive, got {self.sample_rate}")
        if samples.size and not np.all(np.isfinite(samples)):
            raise ConfigError("samples", "contains non-finite values")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration(self) -> float:
        return len(self) / self.sample_rate

    @classmethod
    def silence(cls, n_samples: int, sample_rate: int = SAMPLE_RATE) -> Waveform:
        return cls(np.zeros(n_samples), sample_rate)

    def padded(self, n_samples: int) -> Waveform:
        """Zero-pad (never truncate) to ``n_samples``."""
        if n_samples <= len(self):
            return self
        return Waveform(np.pad(self.samples, (0, n_samples - len(self))), self.sample_rate)

    def cropped(self, n_samples: int) -> Waveform:
        return Waveform(self.samples[:n_samples], self.sample_rate)

    def scaled(self, gain: float) -> Waveform:
        return Waveform(self.samples * gain, self.sample_rate)


def require_rate(w: Waveform, name: str, rate: int = SAMPLE_RATE) -> None:
    if w.sample_rate != rate:
        raise ConfigError(name, f"sample_rate={w.sample_rate}, only {rate} Hz is supported")


def read_wav(path: PathLike) -> Waveform:
    """Read a RIFF PCM16 mono file; samples are scaled by 1/32768."""
    p = Path(path)
    if not p.exists():
        raise StorageError(str(p), "file not found")
    try:
        info = sf.info(str(p))
    except RuntimeError as e:
        raise FormatError(str(p), f"unreadable audio header: {e}") from e
    if info.format != "WAV":
        raise FormatError(str(p), f"format={info.format}")
    if info.channels != 1:
        raise FormatError(str(p), f"channels={info.channels}")
    if info.subtype != "PCM_16":
        raise FormatError(str(p), f"subtype={info.subtype}")
    codes, rate = sf.read(str(p), dtype="int16", always_2d=False)
    return Waveform(codes.astype(np.float64) / PCM_SCALE, int(rate))


def quantize(samples: np.ndarray) -> np.ndarray:
    """Clamp to [-1, 1) and map to int16 codes."""
    clamped = np.clip(samples, -1.0, 1.0 - 1.0 / PCM_SCALE)
    codes = np.round(clamped * PCM_SCALE)
    return np.clip(codes, -32768, 32767).astype(np.int16)


def write_wav(path: PathLike, w: Waveform) -> None:
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        sf.write(str(p), quantize(w.samples), w.sample_rate, subtype="PCM_16", format="WAV")
    except (OSError, RuntimeError) as e:
        raise StorageError(str(p), f"cannot write WAV: {e}") from e
