"""Mini-batch Adam training on mixed-signal manifests."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..autodiff import ops
from ..autodiff.checkpoint import checkpoint_digest, save_checkpoint
from ..autodiff.optim import Adam
from ..autodiff.tensor import DiffTensor
from ..errors import EmptyInputError, NumericError
from ..hook import TrainingHook, dispatch
from ..room.dataset import read_manifest
from .config import ModelConfig, TrainConfig
from .data import PreparedExample, epoch_batches, group_by_shape, prepare_examples, split_validation, stack
from .loss import loss
from .network import forward
from .params import ModelParams

logger = logging.getLogger(__name__)

CHECKPOINT_NAME = "checkpoint.json"
LOG_NAME = "train_log.jsonl"


@dataclass
class TrainSummary:
    best_epoch: int
    best_val_loss: float
    best_val_mae: float
    steps: int
    checkpoint: str
    digest: str
    initial_loss: float
    final_loss: float

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def batch_loss(
    params: ModelParams, examples: Sequence[PreparedExample], batch: Sequence[int], phoneme_weight: float
) -> Tuple[DiffTensor, np.ndarray, np.ndarray]:
    """Loss of a possibly heterogeneous batch.

    Equal-shape groups run as one forward pass each; group losses are
    weighted by their share of the batch. Returns (loss, p_utt, y_utt) with
    the probabilities in group order.
    """
    total: Optional[DiffTensor] = None
    probs: List[np.ndarray] = []
    labels: List[np.ndarray] = []
    n = len(batch)
    for idx in group_by_shape(examples, batch).values():
        arr = stack(examples, idx)
        out = forward(params, arr["mixed"], arr["playback"], arr["phoneme_ids"])
        part = loss(out, arr["y_utt"], arr["y_phon"], phoneme_weight)
        if len(idx) != n:
            part = ops.scale(part, len(idx) / n)
        total = part if total is None else ops.add(total, part)
        probs.append(out.p_utt.value)
        labels.append(arr["y_utt"])
    return total, np.concatenate(probs), np.concatenate(labels)


def validation_metrics(
    params: ModelParams, examples: Sequence[PreparedExample], indices: Sequence[int], phoneme_weight: float, batch_size: int
) -> Dict[str, float]:
    """Example-weighted mean loss and utterance MAE over ``indices``."""
    frozen = params.frozen()
    loss_sum = 0.0
    abs_err: List[np.ndarray] = []
    for s in range(0, len(indices), batch_size):
        chunk = list(indices[s:s + batch_size])
        value, p, y = batch_loss(frozen, examples, chunk, phoneme_weight)
        loss_sum += value.item() * len(chunk)
        abs_err.append(np.abs(p - y))
    n = max(len(indices), 1)
    return {"val_loss": loss_sum / n, "val_mae": float(np.concatenate(abs_err).mean()) if abs_err else math.nan}


class Trainer:
    """Runs the training loop for one model configuration.

    Only mixed-signal features, playback features and labels reach the
    model; the loss has no clean-speech term.
    """

    def __init__(
        self,
        model_config: ModelConfig,
        train_config: TrainConfig,
        out_dir: Path,
        hooks: Sequence[TrainingHook] = (),
        threads: int = 1,
    ) -> None:
        self.model_config = model_config
        self.train_config = train_config
        self.out_dir = Path(out_dir)
        self.hooks = list(hooks)
        self.threads = max(1, int(threads))

    def load(self, manifest: Path) -> List[PreparedExample]:
        records = read_manifest(manifest)
        if not records:
            raise EmptyInputError("train.manifest", f"{manifest} has no examples")
        aec = self.train_config.aec if self.train_config.aec_enabled else None
        return prepare_examples(records, self.model_config.n_mels, aec, self.threads)

    def fit(self, examples: Sequence[PreparedExample]) -> TrainSummary:
        tc = self.train_config
        if not examples:
            raise EmptyInputError("train.manifest", "no examples to train on")
        train_idx, val_idx = split_validation(len(examples), tc.validation_fraction, tc.seed)
        if len(val_idx) == 0:
            val_idx = train_idx
        params = ModelParams.initialize(self.model_config, tc.seed)
        optim = Adam(params.tensors, lr=tc.learning_rate)
        rng = np.random.default_rng([tc.seed, 5])
        ckpt_path = self.out_dir / CHECKPOINT_NAME

        dispatch(self.hooks, "on_train_start", {"seed": tc.seed, "model": self.model_config.to_dict(), "train": tc.to_dict()})
        logger.info(
            f"training {params.count()} parameters on {len(train_idx)} examples, validating on {len(val_idx)}"
        )
        step = 0
        best: Optional[Dict[str, Any]] = None
        initial_loss = final_loss = math.nan
        try:
            for epoch in range(1, tc.epochs + 1):
                losses = []
                for batch in epoch_batches(examples, train_idx, tc.batch_size, rng):
                    if tc.max_steps is not None and step >= tc.max_steps:
                        break
                    value = self._step(params, optim, examples, batch, step + 1)
                    step += 1
                    losses.append(value)
                    if step == 1:
                        initial_loss = value
                    final_loss = value
                    dispatch(self.hooks, "on_step_end", step, value, tc.learning_rate)
                if not losses:
                    break
                metrics = validation_metrics(params, examples, val_idx, tc.phoneme_weight, tc.batch_size)
                metrics["train_loss"] = float(np.mean(losses))
                metrics["steps"] = step
                if best is None or metrics["val_loss"] < best["val_loss"]:
                    best = {"epoch": epoch, **metrics}
                    self._save(ckpt_path, params, epoch, metrics["val_loss"])
                dispatch(self.hooks, "on_epoch_end", epoch, metrics)
        except Exception as e:
            dispatch(self.hooks, "on_error", "train", e)
            raise
        if best is None:
            raise EmptyInputError("train", "no optimizer step was taken")

        summary = TrainSummary(
            best_epoch=best["epoch"],
            best_val_loss=best["val_loss"],
            best_val_mae=best["val_mae"],
            steps=step,
            checkpoint=str(ckpt_path),
            digest=checkpoint_digest(ckpt_path),
            initial_loss=initial_loss,
            final_loss=final_loss,
        )
        dispatch(self.hooks, "on_train_end", summary.to_dict())
        return summary

    def run(self, manifest: Path) -> TrainSummary:
        return self.fit(self.load(manifest))

    def _step(self, params: ModelParams, optim: Adam, examples, batch, step: int) -> float:
        try:
            value, _, _ = batch_loss(params, examples, batch, self.train_config.phoneme_weight)
            value.backward()
            optim.step()
        except NumericError as e:
            optim.zero_grad()
            raise NumericError("loss", f"non-finite value at step {step} ({e.name}: {e.message})", {**e.details, "step": step}) from e
        return value.item()

    def _save(self, path: Path, params: ModelParams, epoch: int, val_loss: float) -> None:
        metadata = {
            "model_config": self.model_config.to_dict(),
            "train_config": self.train_config.to_dict(),
            "epoch": epoch,
            "val_loss": val_loss,
            "seed": self.train_config.seed,
        }
        save_checkpoint(path, params.arrays(), metadata)
        logger.info(f"epoch {epoch}: new best val_loss={val_loss:.6f}, saved {path}")


def train(
    manifest: Path,
    model_config: ModelConfig,
    train_config: TrainConfig,
    out_dir: Path,
    hooks: Sequence[TrainingHook] = (),
    threads: int = 1,
) -> TrainSummary:
    """Train on ``manifest`` and keep the best checkpoint by validation loss in ``out_dir``."""
    return Trainer(model_config, train_config, out_dir, hooks, threads).run(manifest)
