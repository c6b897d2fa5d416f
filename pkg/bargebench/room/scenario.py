"""Barge-in scenario sampling and synthesis."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.signal import fftconvolve

from ..audio.phonemes import text_to_phonemes
from ..audio.wav import SAMPLE_RATE, Waveform, require_rate
from ..errors import ConfigError, DegenerateSignalError, GeometryError
from .geometry import MAX_REFLECTION_ORDER, RoomSpec, generate_rir, reflection_order

FLOOR_AREA_RANGE = (10.0, 50.0)
HEIGHT_RANGE = (2.5, 5.0)
RT60_RANGE = (0.2, 0.6)
DELAY_RANGE = (0.01, 0.1)
SIR_RANGE = (-12.0, 3.0)
ASPECT_RANGE = (0.5, 2.0)
WALL_MARGIN = 0.1
MIN_SOURCE_MIC_DISTANCE = 0.3
MAX_PLACEMENT_TRIES = 1000


class ScenarioKind(str, Enum):
    NON_PLAYBACK = "NonPlayback"
    PLAYBACK_MUSIC = "PlaybackMusic"
    PLAYBACK_SPEECH = "PlaybackSpeech"
    SELF_REFERENCING = "SelfReferencing"

    @property
    def has_user_speech(self) -> bool:
        return self is not ScenarioKind.SELF_REFERENCING

    @property
    def has_playback(self) -> bool:
        return self is not ScenarioKind.NON_PLAYBACK

    @property
    def uses_sir(self) -> bool:
        return self in (ScenarioKind.PLAYBACK_MUSIC, ScenarioKind.PLAYBACK_SPEECH)

    @classmethod
    def parse(cls, value: str) -> ScenarioKind:
        try:
            return cls(value)
        except ValueError:
            raise ConfigError("kind", f"unknown scenario kind {value!r}; expected one of {[k.value for k in cls]}") from None


@dataclass(frozen=True)
class ScenarioSpec:
    kind: ScenarioKind
    room: RoomSpec
    user_pos: Tuple[float, float, float]
    speaker_pos: Tuple[float, float, float]
    mic_pos: Tuple[float, float, float]
    propagation_delay: float
    sir_db: Optional[float]
    seed: int


@dataclass(frozen=True)
class ScenarioExample:
    """One synthesized instance. Holds only what a deployed device can observe."""

    mixed: Waveform
    playback_ref: Waveform
    keyword: str
    y_utt: int
    y_phon: Tuple[int, ...]
    spec: ScenarioSpec

    @property
    def phoneme_ids(self) -> Tuple[int, ...]:
        return tuple(text_to_phonemes(self.keyword))


def _place(rng: np.random.Generator, room: RoomSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    lo = np.full(3, WALL_MARGIN)
    hi = room.dims - WALL_MARGIN
    for _ in range(MAX_PLACEMENT_TRIES):
        user, speaker, mic = (rng.uniform(lo, hi) for _ in range(3))
        if (
            np.linalg.norm(user - mic) >= MIN_SOURCE_MIC_DISTANCE
            and np.linalg.norm(speaker - mic) >= MIN_SOURCE_MIC_DISTANCE
        ):
            return user, speaker, mic
    raise GeometryError(
        "positions",
        f"no placement with {WALL_MARGIN} m wall margin after {MAX_PLACEMENT_TRIES} tries; widen the margin",
    )


def sample_scenario(kind: ScenarioKind, rng_seed: int) -> ScenarioSpec:
    """Draw a scenario from the room/delay/SIR uniform distributions.

    Every draw is made for every kind so the stream stays aligned; sir_db is
    then dropped for kinds without a user/echo mix.
    """
    kind = ScenarioKind(kind)
    rng = np.random.default_rng(int(rng_seed))
    area = rng.uniform(*FLOOR_AREA_RANGE)
    height = rng.uniform(*HEIGHT_RANGE)
    rt60 = rng.uniform(*RT60_RANGE)
    aspect = rng.uniform(*ASPECT_RANGE)
    delay = rng.uniform(*DELAY_RANGE)
    sir = rng.uniform(*SIR_RANGE)
    length = math.sqrt(area * aspect)
    width = area / length
    room = RoomSpec(area, height, length, width, rt60)
    user, speaker, mic = _place(rng, room)
    return ScenarioSpec(
        kind=kind,
        room=room,
        user_pos=tuple(float(v) for v in user),
        speaker_pos=tuple(float(v) for v in speaker),
        mic_pos=tuple(float(v) for v in mic),
        propagation_delay=float(delay),
        sir_db=float(sir) if kind.uses_sir else None,
        seed=int(rng_seed),
    )


def support_power(x: np.ndarray) -> float:
    """Mean squared amplitude between the first and last nonzero samples."""
    nz = np.flatnonzero(x)
    if nz.size == 0:
        return 0.0
    seg = x[nz[0]:nz[-1] + 1]
    return float(np.mean(seg * seg))


def _align(*signals: np.ndarray) -> Tuple[np.ndarray, ...]:
    n = max(s.shape[0] for s in signals)
    return tuple(np.pad(s, (0, n - s.shape[0])) for s in signals)


def mix_at_sir(target_at_mic: Waveform, echo_at_mic: Waveform, sir_db: float) -> Tuple[Waveform, float]:
    """Scale the echo so that P_target / P_echo_scaled = 10^(sir/10)."""
    if target_at_mic.sample_rate != echo_at_mic.sample_rate:
        raise ConfigError("echo_at_mic", "sample rates differ")
    p_t = support_power(target_at_mic.samples)
    p_e = support_power(echo_at_mic.samples)
    if p_t == 0.0:
        raise DegenerateSignalError("target_at_mic", "silent signal")
    if p_e == 0.0:
        raise DegenerateSignalError("echo_at_mic", "silent signal")
    gain = math.sqrt(p_t / (p_e * 10.0 ** (sir_db / 10.0)))
    t, e = _align(target_at_mic.samples, echo_at_mic.samples)
    return Waveform(t + gain * e, target_at_mic.sample_rate), gain


def _rir_order(spec: ScenarioSpec, max_order: int) -> int:
    return reflection_order(spec.room, cap=min(max_order, MAX_REFLECTION_ORDER))


def user_path(spec: ScenarioSpec, user_speech: Waveform, max_order: int = MAX_REFLECTION_ORDER) -> np.ndarray:
    rir = generate_rir(spec.room, spec.user_pos, spec.mic_pos, order=_rir_order(spec, max_order))
    return fftconvolve(user_speech.samples, rir.taps)


def echo_path(spec: ScenarioSpec, playback_src: Waveform, max_order: int = MAX_REFLECTION_ORDER) -> np.ndarray:
    """Delay the dry playback by whole samples, fold the fraction into the RIR, convolve."""
    delay = spec.propagation_delay * playback_src.sample_rate
    whole = int(math.floor(delay))
    rir = generate_rir(
        spec.room, spec.speaker_pos, spec.mic_pos, order=_rir_order(spec, max_order), delay_offset=delay - whole
    )
    shifted = np.concatenate([np.zeros(whole), playback_src.samples])
    return fftconvolve(shifted, rir.taps)


def synthesize_example(
    spec: ScenarioSpec,
    user_speech: Optional[Waveform],
    playback_src: Optional[Waveform],
    keyword: str,
    labels: Tuple[int, Sequence[int]],
    max_order: int = MAX_REFLECTION_ORDER,
) -> ScenarioExample:
    kind = spec.kind
    y_utt, y_phon = int(labels[0]), tuple(int(v) for v in labels[1])
    n_phon = len(text_to_phonemes(keyword))
    if y_utt not in (0, 1) or any(v not in (0, 1) for v in y_phon):
        raise ConfigError("labels", "labels must be binary")
    if len(y_phon) != n_phon:
        raise ConfigError("labels", f"y_phon has {len(y_phon)} entries, keyword has {n_phon} phonemes")

    if kind.has_user_speech and user_speech is None:
        raise ConfigError("user_speech", f"required for {kind.value}")
    if not kind.has_user_speech and user_speech is not None:
        raise ConfigError("user_speech", f"must be absent for {kind.value}")
    if kind.has_playback and playback_src is None:
        raise ConfigError("playback_src", f"required for {kind.value}")
    if not kind.has_playback and playback_src is not None:
        raise ConfigError("playback_src", f"must be absent for {kind.value}")
    if kind is ScenarioKind.SELF_REFERENCING and (y_utt != 0 or any(y_phon)):
        raise ConfigError("labels", "all ground truth is 0 for SelfReferencing")
    for name, w in (("user_speech", user_speech), ("playback_src", playback_src)):
        if w is not None:
            require_rate(w, name)

    if kind is ScenarioKind.NON_PLAYBACK:
        mixed = user_path(spec, user_speech, max_order)
        dry = np.zeros(mixed.shape[0])
    elif kind is ScenarioKind.SELF_REFERENCING:
        mixed = echo_path(spec, playback_src, max_order)
        dry = playback_src.samples
    else:
        target = Waveform(user_path(spec, user_speech, max_order))
        echo = Waveform(echo_path(spec, playback_src, max_order))
        mixed = mix_at_sir(target, echo, spec.sir_db)[0].samples
        dry = playback_src.samples
    mixed, dry = _align(mixed, dry)
    return ScenarioExample(
        mixed=Waveform(mixed, SAMPLE_RATE),
        playback_ref=Waveform(dry, SAMPLE_RATE),
        keyword=keyword,
        y_utt=y_utt,
        y_phon=y_phon,
        spec=spec,
    )
