"""Feature preparation and batching shared by training and evaluation."""
from __future__ import annotations

import concurrent.futures
import logging
from collections import OrderedDict
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..aec import cancel_echo
from ..audio.features import log_mel
from ..room.dataset import ManifestRecord
from ..room.scenario import ScenarioKind

logger = logging.getLogger(__name__)

ShapeKey = Tuple[int, int]


@dataclass(frozen=True)
class PreparedExample:
    """Model-ready view of one manifest record: features, phoneme ids, labels."""

    id: str
    kind: ScenarioKind
    mixed: np.ndarray     # (T_f, F)
    playback: np.ndarray  # (T_f, F)
    phoneme_ids: Tuple[int, ...]
    y_utt: int
    y_phon: Tuple[int, ...]

    @property
    def shape_key(self) -> ShapeKey:
        return self.mixed.shape[0], len(self.phoneme_ids)


def prepare_example(record: ManifestRecord, n_mels: int, aec: Optional[dict] = None) -> PreparedExample:
    """Load the WAV pair and compute log-mel features.

    With ``aec.enabled`` the mixed signal is replaced by the NLMS residual
    against the playback reference before feature extraction.
    """
    mixed, playback = record.load_audio()
    if aec and aec.get("enabled"):
        mixed = cancel_echo(mixed, playback, aec)
    return PreparedExample(
        id=record.id,
        kind=record.kind,
        mixed=log_mel(mixed, n_mels=n_mels).frames,
        playback=log_mel(playback, n_mels=n_mels).frames,
        phoneme_ids=tuple(record.phoneme_ids),
        y_utt=int(record.y_utt),
        y_phon=tuple(int(v) for v in record.y_phon),
    )


def prepare_examples(
    records: Sequence[ManifestRecord], n_mels: int, aec: Optional[dict] = None, threads: int = 1
) -> List[PreparedExample]:
    """Prepare every record, in manifest order."""
    if threads > 1 and len(records) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(lambda r: prepare_example(r, n_mels, aec), records))
    else:
        out = [prepare_example(r, n_mels, aec) for r in records]
    logger.debug(f"prepared {len(out)} examples (aec={'on' if aec and aec.get('enabled') else 'off'})")
    return out


def group_by_shape(examples: Sequence[PreparedExample], indices: Sequence[int]) -> "OrderedDict[ShapeKey, List[int]]":
    """Split ``indices`` into groups of equal feature length and keyword length, first-seen order."""
    groups: "OrderedDict[ShapeKey, List[int]]" = OrderedDict()
    for i in indices:
        groups.setdefault(examples[i].shape_key, []).append(int(i))
    return groups


def stack(examples: Sequence[PreparedExample], indices: Sequence[int]) -> Dict[str, np.ndarray]:
    """Arrays for one equal-shape group."""
    sel = [examples[i] for i in indices]
    return {
        "mixed": np.stack([e.mixed for e in sel]),
        "playback": np.stack([e.playback for e in sel]),
        "phoneme_ids": np.array([e.phoneme_ids for e in sel], dtype=np.int64),
        "y_utt": np.array([e.y_utt for e in sel], dtype=np.float64),
        "y_phon": np.array([e.y_phon for e in sel], dtype=np.float64),
    }


def split_validation(n: int, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded (train, validation) index split; validation gets round(fraction * n), at least one when fraction > 0."""
    perm = np.random.default_rng([int(seed), 3]).permutation(n)
    n_val = int(round(fraction * n))
    if fraction > 0 and n >= 2:
        n_val = min(max(n_val, 1), n - 1)
    else:
        n_val = 0
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def _interleave_kinds(indices: Sequence[int], examples: Sequence[PreparedExample], rng: np.random.Generator) -> List[int]:
    by_kind: Dict[ScenarioKind, List[int]] = {}
    for i in rng.permutation(np.asarray(indices, dtype=np.int64)):
        by_kind.setdefault(examples[i].kind, []).append(int(i))
    queues = [by_kind[k] for k in ScenarioKind if k in by_kind]
    out: List[int] = []
    pos = 0
    while len(out) < len(indices):
        for q in queues:
            if pos < len(q):
                out.append(q[pos])
        pos += 1
    return out


def epoch_batches(
    examples: Sequence[PreparedExample], indices: Sequence[int], batch_size: int, rng: np.random.Generator
) -> List[List[int]]:
    """Batches for one epoch: positives and negatives 1:1, scenario kinds interleaved.

    The smaller class is cycled so every example of the larger class is seen
    once per epoch. A split holding one class only is batched as is.
    """
    pos = _interleave_kinds([i for i in indices if examples[i].y_utt == 1], examples, rng)
    neg = _interleave_kinds([i for i in indices if examples[i].y_utt == 0], examples, rng)
    if not pos or not neg:
        flat = pos or neg
        return [flat[s:s + batch_size] for s in range(0, len(flat), batch_size)]
    n_pos = batch_size // 2
    n_neg = batch_size - n_pos
    n_batches = max(-(-len(pos) // n_pos), -(-len(neg) // n_neg))
    batches = []
    for b in range(n_batches):
        batch = [pos[(b * n_pos + j) % len(pos)] for j in range(n_pos)]
        batch += [neg[(b * n_neg + j) % len(neg)] for j in range(n_neg)]
        batches.append(batch)
    return batches
