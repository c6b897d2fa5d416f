"""Score a checkpoint on a manifest and build the per-scenario report."""
from __future__ import annotations

import concurrent.futures
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .autodiff.checkpoint import checkpoint_digest, load_checkpoint
from .errors import ConfigError, EmptyInputError
from .metrics import EvalReport, ScoredSet
from .model.config import ModelConfig
from .model.data import PreparedExample, group_by_shape, prepare_examples, stack
from .model.network import forward
from .model.params import ModelParams
from .room.dataset import read_manifest

logger = logging.getLogger(__name__)

SCORE_CHUNK = 64


def load_model(checkpoint: Path) -> Tuple[ModelParams, Dict[str, Any]]:
    """Rebuild frozen parameters from a training checkpoint."""
    arrays, metadata = load_checkpoint(checkpoint)
    if "model_config" not in metadata:
        raise ConfigError("checkpoint", f"{checkpoint} carries no model_config metadata")
    config = ModelConfig.from_dict(metadata["model_config"])
    return ModelParams.from_arrays(config, arrays).frozen(), metadata


def score_examples(params: ModelParams, examples: Sequence[PreparedExample], threads: int = 1) -> np.ndarray:
    """P_utt for every example, in input order.

    Equal-shape groups are split into chunks and scored concurrently.
    """
    jobs: List[List[int]] = []
    for idx in group_by_shape(examples, range(len(examples))).values():
        jobs += [idx[s:s + SCORE_CHUNK] for s in range(0, len(idx), SCORE_CHUNK)]

    def run(idx: List[int]) -> Tuple[List[int], np.ndarray]:
        arr = stack(examples, idx)
        out = forward(params, arr["mixed"], arr["playback"], arr["phoneme_ids"])
        return idx, out.p_utt.value

    scores = np.empty(len(examples))
    if threads > 1 and len(jobs) > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(run, jobs))
    else:
        results = [run(j) for j in jobs]
    for idx, p in results:
        scores[idx] = p
    return scores


def report_from_scores(
    examples: Sequence[PreparedExample], scores: np.ndarray, metadata: Optional[Dict[str, Any]] = None
) -> EvalReport:
    by_kind: Dict[str, List[int]] = {}
    for i, e in enumerate(examples):
        by_kind.setdefault(e.kind.value, []).append(i)
    sets = []
    for kind, idx in by_kind.items():
        labels = np.array([examples[i].y_utt for i in idx])
        s = ScoredSet(scores[idx], labels, kind)
        if not s.has_both_classes:
            logger.info(f"{kind}: single-class labels, reporting MAE only")
        sets.append(s)
    return EvalReport.from_sets(sets, metadata)


def evaluate(checkpoint: Path, manifest: Path, aec: Optional[dict] = None, threads: int = 1) -> EvalReport:
    """Score every manifest example and group metrics by scenario kind.

    ``aec`` with ``enabled: true`` puts the NLMS canceller in front of the
    model (the "baseline + NLMS" comparison).
    """
    params, metadata = load_model(checkpoint)
    records = read_manifest(manifest)
    if not records:
        raise EmptyInputError("eval.manifest", f"{manifest} has no examples")
    aec_on = bool(aec and aec.get("enabled"))
    examples = prepare_examples(records, params.config.n_mels, aec if aec_on else None, threads)
    logger.info(f"scoring {len(examples)} examples with mask_subnet={params.config.mask_subnet}")
    scores = score_examples(params, examples, threads)
    meta = {
        "checkpoint_digest": checkpoint_digest(checkpoint),
        "mask_subnet": params.config.mask_subnet,
        "aec": aec_on,
        "epoch": metadata.get("epoch"),
        "n": len(examples),
    }
    return report_from_scores(examples, scores, meta)
