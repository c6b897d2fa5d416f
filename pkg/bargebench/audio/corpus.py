"""Source pools feeding the scenario synthesizer.

A pool is either the built-in toy renderer or a JSONL manifest of 16 kHz
mono PCM16 WAV files (``{"path": ..., "text": ...}`` per line, paths
relative to the manifest).
"""
from __future__ import annotations

import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from ..errors import ConfigError, StorageError
from ..paths import resolve_relative
from .phonemes import text_to_phonemes
from .synth import synth_babble, synth_keyword, synth_music
from .wav import Waveform, read_wav, require_rate

TOY = "toy"


class SpeechPool(ABC):
    """User speech: renders a given keyword text."""

    @abstractmethod
    def keywords(self) -> List[str]:
        """Keyword texts this pool can render."""

    @abstractmethod
    def render(self, text: str, seed: int) -> Waveform:
        """Return one utterance of ``text``; same (text, seed) gives the same audio."""


class PlaybackPool(ABC):
    """Device playback content (music or speech)."""

    @abstractmethod
    def draw(self, seed: int, duration_s: float) -> Waveform:
        """Return playback audio of roughly ``duration_s`` seconds."""


class ToySpeechPool(SpeechPool):
    def __init__(self, keywords: Sequence[str]) -> None:
        if not keywords:
            raise ConfigError("dataset.keywords", "toy speech pool needs at least one keyword")
        for k in keywords:
            text_to_phonemes(k)
        self._keywords = list(keywords)

    def keywords(self) -> List[str]:
        return list(self._keywords)

    def render(self, text: str, seed: int) -> Waveform:
        w, _ = synth_keyword(text_to_phonemes(text), speaker_jitter=seed)
        return w


class ToyMusicPool(PlaybackPool):
    def draw(self, seed: int, duration_s: float) -> Waveform:
        return synth_music(seed, duration_s)


class ToyBabblePool(PlaybackPool):
    def draw(self, seed: int, duration_s: float) -> Waveform:
        return synth_babble(seed, duration_s)


def _load_entries(path: Path, pool_name: str, need_text: bool) -> List[Dict[str, str]]:
    if not path.exists():
        raise ConfigError(pool_name, f"manifest {path} not found")
    entries: List[Dict[str, str]] = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise StorageError(str(path), f"cannot read pool manifest: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ConfigError(pool_name, f"{path}:{lineno}: invalid JSON ({e.msg})") from e
        if "path" not in obj or (need_text and "text" not in obj):
            raise ConfigError(pool_name, f"{path}:{lineno}: missing 'path'{' or text' if need_text else ''}")
        entries.append({"path": str(resolve_relative(path.parent, obj["path"])), "text": obj.get("text", "")})
    if not entries:
        raise ConfigError(pool_name, f"pool manifest {path} is empty")
    return entries


def _read_checked(path: str, pool_name: str) -> Waveform:
    w = read_wav(path)
    require_rate(w, pool_name)
    return w


class ManifestSpeechPool(SpeechPool):
    def __init__(self, path: Path, pool_name: str = "sources.speech") -> None:
        self.pool_name = pool_name
        self._by_text: Dict[str, List[str]] = {}
        for e in _load_entries(Path(path), pool_name, need_text=True):
            text_to_phonemes(e["text"])
            self._by_text.setdefault(e["text"], []).append(e["path"])

    def keywords(self) -> List[str]:
        return sorted(self._by_text)

    def render(self, text: str, seed: int) -> Waveform:
        paths = self._by_text.get(text)
        if not paths:
            raise ConfigError(self.pool_name, f"no utterance of {text!r} in pool")
        pick = int(np.random.default_rng(seed).integers(0, len(paths)))
        return _read_checked(paths[pick], self.pool_name)


class ManifestPlaybackPool(PlaybackPool):
    def __init__(self, path: Path, pool_name: str) -> None:
        self.pool_name = pool_name
        self._paths = [e["path"] for e in _load_entries(Path(path), pool_name, need_text=False)]

    def draw(self, seed: int, duration_s: float) -> Waveform:
        pick = int(np.random.default_rng(seed).integers(0, len(self._paths)))
        w = _read_checked(self._paths[pick], self.pool_name)
        return w.cropped(int(round(duration_s * w.sample_rate)))


def speech_pool(source: str, keywords: Optional[Sequence[str]], base: Path) -> SpeechPool:
    if source == TOY:
        return ToySpeechPool(keywords or [])
    return ManifestSpeechPool(resolve_relative(base, source))


def playback_pool(source: str, toy: PlaybackPool, base: Path, pool_name: str) -> PlaybackPool:
    if source == TOY:
        return toy
    return ManifestPlaybackPool(resolve_relative(base, source), pool_name)
