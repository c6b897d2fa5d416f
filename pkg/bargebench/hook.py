from __future__ import annotations

import json
import logging
import sys
import traceback
from abc import ABC
from pathlib import Path
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class TrainingHook(ABC):
    """Base hook with robust, no-op defaults.

    Hooks observe a training run. All methods are best-effort and should not
    raise: the trainer calls them through ``dispatch`` which swallows errors.
    """

    def on_train_start(self, config: Dict[str, Any]) -> None:  # noqa: D401
        self._safe_noop()

    def on_step_end(self, step: int, loss: float, lr: float) -> None:  # noqa: D401
        self._safe_noop()

    def on_epoch_end(self, epoch: int, metrics: Dict[str, Any]) -> None:  # noqa: D401
        self._safe_noop()

    def on_train_end(self, summary: Dict[str, Any]) -> None:  # noqa: D401
        self._safe_noop()

    def on_error(self, scope: str, error: Exception) -> None:  # noqa: D401
        self._safe_noop()

    def close(self) -> None:
        self._safe_noop()

    def _safe_noop(self) -> None:
        return None


def dispatch(hooks, event: str, *args: Any) -> None:
    for h in hooks:
        try:
            getattr(h, event)(*args)
        except Exception as e:  # noqa: BLE001
            logger.debug(f"hook {type(h).__name__}.{event} failed: {e}")


class PrintHook(TrainingHook):
    """Human-readable progress for local runs."""

    def __init__(self, stream=None, every: int = 50) -> None:
        self.stream = stream or sys.stderr
        self.every = max(1, int(every))

    def on_train_start(self, config: Dict[str, Any]) -> None:
        try:
            print(f"[train] start: {json.dumps(config, sort_keys=True)[:300]}", file=self.stream)
        except Exception:
            pass

    def on_step_end(self, step: int, loss: float, lr: float) -> None:
        try:
            if step % self.every == 0:
                print(f"[train] step {step}: loss={loss:.5f}", file=self.stream)
        except Exception:
            pass

    def on_epoch_end(self, epoch: int, metrics: Dict[str, Any]) -> None:
        try:
            parts = " ".join(f"{k}={v:.5f}" if isinstance(v, float) else f"{k}={v}" for k, v in metrics.items())
            print(f"[train] epoch {epoch}: {parts}", file=self.stream)
        except Exception:
            pass

    def on_error(self, scope: str, error: Exception) -> None:
        try:
            print(f"[train] error in {scope}: {error}\n{traceback.format_exc()}", file=sys.stderr)
        except Exception:
            pass


class JsonlLogHook(TrainingHook):
    """Writes one ``{step, loss, lr}`` JSON object per optimizer step."""

    def __init__(self, path: Path) -> None:
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", encoding="utf-8")

    def on_step_end(self, step: int, loss: float, lr: float) -> None:
        try:
            self._fh.write(json.dumps({"step": step, "loss": loss, "lr": lr}) + "\n")
            self._fh.flush()
        except Exception:
            pass

    def on_train_end(self, summary: Dict[str, Any]) -> None:
        self.close()

    def close(self) -> None:
        try:
            if not self._fh.closed:
                self._fh.close()
        except Exception:
            pass


class LoggingHook(TrainingHook):
    def __init__(self, log: Optional[logging.Logger] = None) -> None:
        self.log = log or logger

    def on_train_start(self, config: Dict[str, Any]) -> None:
        self.log.info(f"training started (seed={config.get('seed')})")

    def on_step_end(self, step: int, loss: float, lr: float) -> None:
        self.log.debug(f"step {step} loss={loss:.6f} lr={lr}")

    def on_epoch_end(self, epoch: int, metrics: Dict[str, Any]) -> None:
        self.log.info(f"epoch {epoch} {metrics}")

    def on_train_end(self, summary: Dict[str, Any]) -> None:
        self.log.info(f"training finished: best_epoch={summary.get('best_epoch')}")

    def on_error(self, scope: str, error: Exception) -> None:
        self.log.error(f"error in {scope}: {error}")
