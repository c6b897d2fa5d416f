"""Dataset building: per-example seeds, WAV pairs and the JSONL manifest."""
from __future__ import annotations

import concurrent.futures
import json
import logging
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import jsonschema
import numpy as np

from ..audio.corpus import PlaybackPool, SpeechPool
from ..audio.phonemes import text_to_phonemes
from ..audio.wav import Waveform, read_wav, write_wav
from ..errors import ConfigError, StorageError
from ..paths import atomic_write_text, relative_to, resolve_relative
from .geometry import MAX_REFLECTION_ORDER
from .scenario import ScenarioExample, ScenarioKind, sample_scenario, synthesize_example

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.jsonl"
AUDIO_DIRNAME = "audio"
_MASK64 = (1 << 64) - 1


def mix64(seed: int, index: int) -> int:
    """splitmix64 finalizer over (seed, index): independent per-example seeds."""
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@lru_cache(maxsize=1)
def manifest_schema() -> Dict[str, Any]:
    text = resources.files("bargebench").joinpath("schemas/manifest.json").read_text(encoding="utf-8")
    return json.loads(text)


def validate_record(record: Dict[str, Any], where: str = "manifest") -> None:
    try:
        jsonschema.validate(record, manifest_schema())
    except jsonschema.ValidationError as e:
        field = ".".join(str(p) for p in e.absolute_path) or where
        raise ConfigError(field, f"{where}: {e.message}") from e


@dataclass(frozen=True)
class ManifestRecord:
    """A manifest line with audio paths resolved to absolute paths."""

    id: str
    kind: ScenarioKind
    mixed_path: Path
    playback_path: Path
    keyword: str
    phoneme_ids: Tuple[int, ...]
    y_utt: int
    y_phon: Tuple[int, ...]
    sir_db: Optional[float]
    rt60: float
    delay_s: float
    seed: int

    def load_audio(self) -> Tuple[Waveform, Waveform]:
        return read_wav(self.mixed_path), read_wav(self.playback_path)


def read_manifest(path: Path) -> List[ManifestRecord]:
    p = Path(path)
    if not p.exists():
        raise StorageError(str(p), "manifest not found")
    try:
        lines = p.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise StorageError(str(p), f"cannot read manifest: {e}") from e
    records = []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as e:
            raise ConfigError("manifest", f"{p}:{lineno}: invalid JSON ({e.msg})") from e
        validate_record(obj, f"{p}:{lineno}")
        records.append(
            ManifestRecord(
                id=obj["id"],
                kind=ScenarioKind(obj["kind"]),
                mixed_path=resolve_relative(p.parent, obj["mixed_path"]),
                playback_path=resolve_relative(p.parent, obj["playback_path"]),
                keyword=obj["keyword"],
                phoneme_ids=tuple(obj["phoneme_ids"]),
                y_utt=obj["y_utt"],
                y_phon=tuple(obj["y_phon"]),
                sir_db=obj["sir_db"],
                rt60=obj["rt60"],
                delay_s=obj["delay_s"],
                seed=obj["seed"],
            )
        )
    return records


def write_manifest(path: Path, records: Sequence[Dict[str, Any]]) -> Path:
    """Validate every record, then write the JSONL file atomically."""
    lines = []
    for i, r in enumerate(records):
        validate_record(r, f"record {i}")
        lines.append(json.dumps(r, sort_keys=True))
    return atomic_write_text(path, "".join(line + "\n" for line in lines))


@dataclass
class SourcePools:
    speech: SpeechPool
    music: PlaybackPool
    playback_speech: PlaybackPool


@dataclass(frozen=True)
class DatasetPlan:
    seed: int
    counts: Dict[str, int]
    keywords: Sequence[str]
    positive_fraction: float = 0.5
    max_duration_s: Optional[float] = None
    max_order: int = MAX_REFLECTION_ORDER

    def kinds(self) -> List[ScenarioKind]:
        """Kinds in round-robin order until each count is used up."""
        remaining = {ScenarioKind(k): int(v) for k, v in self.counts.items()}
        order = [k for k in ScenarioKind if remaining.get(k, 0) > 0]
        out: List[ScenarioKind] = []
        while order:
            for k in list(order):
                out.append(k)
                remaining[k] -= 1
                if remaining[k] == 0:
                    order.remove(k)
        return out


def _phoneme_labels(query: Sequence[int], spoken: Sequence[int]) -> Tuple[int, ...]:
    present = set(spoken)
    return tuple(int(p in present) for p in query)


def render_example(kind: ScenarioKind, seed: int, plan: DatasetPlan, pools: SourcePools) -> ScenarioExample:
    """Regenerate one example from its own seed alone."""
    spec = sample_scenario(kind, seed)
    rng = np.random.default_rng([seed, 1])
    keywords = list(plan.keywords)
    query = keywords[int(rng.integers(0, len(keywords)))]
    query_ids = text_to_phonemes(query)
    speech_seed = mix64(seed, 1)
    playback_seed = mix64(seed, 2)

    if kind is ScenarioKind.SELF_REFERENCING:
        playback = pools.speech.render(query, playback_seed)
        ex = synthesize_example(spec, None, playback, query, (0, [0] * len(query_ids)), plan.max_order)
    else:
        positive = bool(rng.random() < plan.positive_fraction)
        if positive:
            spoken = query
        else:
            others = [k for k in keywords if k != query]
            if not others:
                raise ConfigError("dataset.keywords", "negative examples need at least two keywords")
            spoken = others[int(rng.integers(0, len(others)))]
        user = pools.speech.render(spoken, speech_seed)
        labels = (int(positive), _phoneme_labels(query_ids, text_to_phonemes(spoken)))
        playback = None
        if kind is ScenarioKind.PLAYBACK_MUSIC:
            playback = pools.music.draw(playback_seed, user.duration)
        elif kind is ScenarioKind.PLAYBACK_SPEECH:
            playback = pools.playback_speech.draw(playback_seed, user.duration)
        ex = synthesize_example(spec, user, playback, query, labels, plan.max_order)

    if plan.max_duration_s is not None:
        n = int(round(plan.max_duration_s * ex.mixed.sample_rate))
        mixed = ex.mixed.cropped(n).padded(n)
        playback = ex.playback_ref.cropped(n).padded(n)
        ex = ScenarioExample(mixed, playback, ex.keyword, ex.y_utt, ex.y_phon, ex.spec)
    return ex


def _record(index: int, ex: ScenarioExample, mixed: Path, playback: Path, base: Path) -> Dict[str, Any]:
    return {
        "id": f"{index:06d}",
        "kind": ex.spec.kind.value,
        "mixed_path": relative_to(base, mixed),
        "playback_path": relative_to(base, playback),
        "keyword": ex.keyword,
        "phoneme_ids": list(ex.phoneme_ids),
        "y_utt": ex.y_utt,
        "y_phon": list(ex.y_phon),
        "sir_db": ex.spec.sir_db,
        "rt60": ex.spec.room.rt60,
        "delay_s": ex.spec.propagation_delay,
        "seed": ex.spec.seed,
    }


def build_dataset(plan: DatasetPlan, pools: SourcePools, out_dir: Path, threads: int = 1) -> Path:
    """Synthesize every example and write WAV pairs plus ``manifest.jsonl``.

    Examples are independent (seed = mix64(plan.seed, i)) and rendered on a
    thread pool; the manifest is written once, in index order.
    """
    out = Path(out_dir)
    audio_dir = out / AUDIO_DIRNAME
    kinds = plan.kinds()
    logger.info(f"building {len(kinds)} examples into {out}")

    def job(i: int) -> Dict[str, Any]:
        ex = render_example(kinds[i], mix64(plan.seed, i), plan, pools)
        mixed_p = audio_dir / f"{i:06d}_mixed.wav"
        playback_p = audio_dir / f"{i:06d}_playback.wav"
        write_wav(mixed_p, ex.mixed)
        write_wav(playback_p, ex.playback_ref)
        logger.debug(f"example {i} ({kinds[i].value}) done")
        return _record(i, ex, mixed_p, playback_p, out)

    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise StorageError(str(out), f"cannot create output directory: {e}") from e
    if threads > 1 and len(kinds) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            records = list(ex.map(job, range(len(kinds))))
    else:
        records = [job(i) for i in range(len(kinds))]
    return write_manifest(out / MANIFEST_NAME, records)
