"""Deterministic toy renderers: phoneme keywords, music and babble."""
from __future__ import annotations

from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from .phonemes import INVENTORY_SIZE, check_ids, load_inventory, phonemes_to_text
from .wav import SAMPLE_RATE, Waveform

NOMINAL_PHONEME_S = 0.080
NOMINAL_F0_HZ = 120.0
PITCH_JITTER = 0.10
DURATION_JITTER = 0.15
F2_RELATIVE_AMPLITUDE = 0.7
NOISE_LEVEL = 0.002
EDGE_TAPER_S = 0.008
MIN_PHONEMES, MAX_PHONEMES = 2, 6


@dataclass(frozen=True)
class ToyKeyword:
    """A rendered keyword with exact per-phoneme (start, end) sample spans."""

    text: str
    phoneme_ids: Tuple[int, ...]
    alignment: Tuple[Tuple[int, int], ...]


def _taper(n: int) -> np.ndarray:
    env = np.ones(n)
    edge = min(int(EDGE_TAPER_S * SAMPLE_RATE), n // 2)
    if edge > 0:
        ramp = 0.5 - 0.5 * np.cos(np.pi * np.arange(edge) / edge)
        env[:edge] = ramp
        env[n - edge:] = ramp[::-1]
    return env


def _render_phoneme(f1: float, f2: float, f0: float, n: int, phase: float) -> np.ndarray:
    t = np.arange(n) / SAMPLE_RATE
    carrier = np.sin(2 * np.pi * f1 * t + phase) + F2_RELATIVE_AMPLITUDE * np.sin(2 * np.pi * f2 * t + 2 * phase)
    voicing = 1.0 + 0.5 * np.cos(2 * np.pi * f0 * t)
    return 0.25 * carrier * voicing * _taper(n)


def synth_keyword(phoneme_ids: Sequence[int], speaker_jitter: Optional[int] = None) -> Tuple[Waveform, ToyKeyword]:
    """Render phonemes as two-formant patterns.

    ``speaker_jitter`` seeds a +-10% pitch and per-phoneme +-15% duration
    perturbation; None renders nominal 80 ms phonemes at 120 Hz.
    """
    ids = check_ids(phoneme_ids)
    if not MIN_PHONEMES <= len(ids) <= MAX_PHONEMES:
        raise ConfigError("phoneme_ids", f"need {MIN_PHONEMES}-{MAX_PHONEMES} phonemes, got {len(ids)}")
    inventory = load_inventory()
    nominal = int(round(NOMINAL_PHONEME_S * SAMPLE_RATE))

    if speaker_jitter is None:
        pitch = 1.0
        durations = [nominal] * len(ids)
        noise_seed = [0, *ids]
    else:
        rng = np.random.default_rng(speaker_jitter)
        pitch = 1.0 + rng.uniform(-PITCH_JITTER, PITCH_JITTER)
        stretch = 1.0 + rng.uniform(-DURATION_JITTER, DURATION_JITTER, size=len(ids))
        durations = [int(round(nominal * s)) for s in stretch]
        noise_seed = [int(speaker_jitter) + 1, *ids]

    pieces: List[np.ndarray] = []
    spans: List[Tuple[int, int]] = []
    start = 0
    for k, (pid, n) in enumerate(zip(ids, durations)):
        ph = inventory[pid]
        pieces.append(_render_phoneme(ph.f1_hz, ph.f2_hz, NOMINAL_F0_HZ * pitch, n, phase=0.37 * k))
        spans.append((start, start + n))
        start += n
    samples = np.concatenate(pieces)
    samples = samples + NOISE_LEVEL * np.random.default_rng(noise_seed).standard_normal(samples.shape[0])
    keyword = ToyKeyword(phonemes_to_text(ids), tuple(ids), tuple(spans))
    return Waveform(samples, SAMPLE_RATE), keyword


def synth_babble(seed: int, duration_s: float) -> Waveform:
    """Random phoneme strings back to back: toy playback speech."""
    rng = np.random.default_rng(seed)
    target = int(round(duration_s * SAMPLE_RATE))
    chunks: List[np.ndarray] = []
    total = 0
    while total < target:
        n = int(rng.integers(MIN_PHONEMES, MAX_PHONEMES + 1))
        ids = rng.integers(0, INVENTORY_SIZE, size=n).tolist()
        w, _ = synth_keyword(ids, speaker_jitter=int(rng.integers(0, 2**31)))
        chunks.append(w.samples)
        total += len(w)
    return Waveform(np.concatenate(chunks)[:target], SAMPLE_RATE)


def synth_music(seed: int, duration_s: float) -> Waveform:
    """Sustained harmonic chords with decaying envelopes: toy playback music."""
    rng = np.random.default_rng(seed)
    target = int(round(duration_s * SAMPLE_RATE))
    out = np.zeros(target)
    pos = 0
    while pos < target:
        n = min(int(rng.uniform(0.25, 0.5) * SAMPLE_RATE), target - pos)
        t = np.arange(n) / SAMPLE_RATE
        chord = np.zeros(n)
        for midi in rng.integers(48, 77, size=int(rng.integers(2, 4))):
            f = 440.0 * 2.0 ** ((midi - 69) / 12.0)
            for k in range(1, 5):
                if k * f < SAMPLE_RATE / 2:
                    chord += np.sin(2 * np.pi * k * f * t) / k
        out[pos:pos + n] = 0.08 * chord * np.exp(-3.0 * t) * _taper(n)
        pos += n
    return Waveform(out, SAMPLE_RATE)
