"""Configuration management for bargebench runs."""
from __future__ import annotations

import copy
import secrets
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from .audio.corpus import TOY
from .errors import ConfigError, StorageError
from .paths import atomic_write_text
from .validate import ConfigIssue, FieldRule, FieldValidator, PathValidator, raise_for_issues

KINDS = ("NonPlayback", "PlaybackMusic", "PlaybackSpeech", "SelfReferencing")
MASK_SUBNETS = ("none", "D", "C")


DEFAULTS: Dict[str, Any] = {
    "seed": None,
    "out": "out",
    "threads": 1,
    "dataset": {
        "seed": None,
        "counts": {k: 25 for k in KINDS},
        "keywords": ["hey", "robot"],
        "positive_fraction": 0.5,
        "sources": {"speech": TOY, "music": TOY, "playback_speech": TOY},
        "max_duration_s": None,
        "max_order": 60,
    },
    "model": {
        "mask_subnet": "C",
        "kernel": 4,
        "n_mels": 40,
        "conv_channels": [8, 16],
        "embed_dim": 128,
        "upsample_stride": 2,
        "heads": 1,
    },
    "train": {
        "manifest": None,
        "epochs": 5,
        "max_steps": None,
        "batch_size": 16,
        "learning_rate": 1e-3,
        "validation_fraction": 0.2,
        "phoneme_weight": 1.0,
    },
    "eval": {
        "manifest": None,
        "checkpoint": None,
        "roc_svg": True,
    },
    "aec": {
        "enabled": False,
        "taps": 1024,
        "step": 0.5,
        "eps": 1e-6,
    },
}


# replaced wholesale, never merged key by key
_ATOMIC_KEYS = {"counts"}


def _merge(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in _ATOMIC_KEYS:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


class Config:
    """Run configuration with hierarchical lookup.

    Config hierarchy (higher priority first):
    1. Explicit overrides (CLI global flags)
    2. The YAML config file
    3. Built-in defaults

    Keys are dotted paths into nested sections, e.g. ``dataset.seed``.
    """

    def __init__(self, config_path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None):
        self.config_path = Path(config_path) if config_path else None
        self._file_data: Dict[str, Any] = {}
        self._overrides: Dict[str, Any] = {}
        self.load()
        for key, value in (overrides or {}).items():
            if value is not None:
                self.set(key, value)

    @property
    def base_dir(self) -> Path:
        """Directory relative paths in the file are resolved against."""
        return self.config_path.parent.resolve() if self.config_path else Path.cwd()

    def load(self) -> None:
        """Load configuration from file."""
        if self.config_path is None:
            self._file_data = {}
            return
        if not self.config_path.exists():
            raise ConfigError("config", f"config file {self.config_path} not found")
        try:
            with open(self.config_path, encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigError("config", f"invalid YAML in {self.config_path}: {e}") from e
        except OSError as e:
            raise StorageError(str(self.config_path), f"cannot read config: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config", "top level must be a mapping")
        unknown = sorted(set(data) - set(DEFAULTS))
        if unknown:
            raise ConfigError(", ".join(unknown), "unknown config section(s)")
        self._file_data = data

    def save(self, path: Path) -> Path:
        """Write the fully resolved configuration as YAML."""
        text = yaml.safe_dump(self.resolved(), default_flow_style=False, sort_keys=True)
        return atomic_write_text(path, text)

    def resolved(self) -> Dict[str, Any]:
        return _merge(_merge(DEFAULTS, self._file_data), self._overrides)

    def get(self, key: str, default: Any = None) -> Any:
        """Get a configuration value by dotted key."""
        node: Any = self.resolved()
        for part in key.split("."):
            if not isinstance(node, dict) or part not in node:
                return default
            node = node[part]
        return default if node is None else node

    def set(self, key: str, value: Any) -> None:
        """Set an override value by dotted key."""
        parts = key.split(".")
        node = self._overrides
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        node[parts[-1]] = value

    def section(self, name: str) -> Dict[str, Any]:
        return dict(self.resolved().get(name) or {})

    def materialize_seed(self) -> int:
        """Fix the run seed, drawing one from OS entropy if none was given.

        ``dataset.seed`` follows the top-level seed unless set explicitly.
        """
        seed = self.get("seed")
        if seed is None:
            seed = secrets.randbits(63)
            self.set("seed", seed)
        if self.get("dataset.seed") is None:
            self.set("dataset.seed", int(seed))
        return int(seed)

    def resolve_path(self, key: str) -> Optional[Path]:
        val = self.get(key)
        if val is None:
            return None
        p = Path(val)
        return p if p.is_absolute() else (self.base_dir / p).resolve()

    def validate(self, scope: str) -> None:
        """Collect every issue for ``scope`` (simulate|train|eval|aec) and raise once."""
        issues: List[ConfigIssue] = []
        issues += FieldValidator(_COMMON_RULES).run(self)
        if scope == "simulate":
            issues += FieldValidator(_DATASET_RULES).run(self)
            issues += self._check_counts()
            issues += PathValidator(
                [f"dataset.sources.{k}" for k in ("speech", "music", "playback_speech")], self.base_dir, skip=(TOY,)
            ).run(self)
        if scope in ("train", "eval"):
            issues += FieldValidator(_MODEL_RULES).run(self)
            issues += FieldValidator(_AEC_RULES).run(self)
        if scope == "train":
            issues += FieldValidator(_TRAIN_RULES).run(self)
            issues += PathValidator(["train.manifest"], self.base_dir).run(self)
        if scope == "eval":
            issues += FieldValidator(_EVAL_RULES).run(self)
            issues += PathValidator(["eval.manifest", "eval.checkpoint"], self.base_dir).run(self)
        if scope == "aec":
            issues += FieldValidator(_AEC_RULES).run(self)
        raise_for_issues(issues)

    def _check_counts(self) -> List[ConfigIssue]:
        counts = self.get("dataset.counts") or {}
        issues = []
        if not isinstance(counts, dict):
            return [ConfigIssue("type", "dataset.counts", "dataset.counts must be a mapping of kind -> count")]
        for k, v in counts.items():
            if k not in KINDS:
                issues.append(ConfigIssue("choice", f"dataset.counts.{k}", f"unknown scenario kind {k!r}"))
            elif isinstance(v, bool) or not isinstance(v, int) or v < 0:
                issues.append(ConfigIssue("range", f"dataset.counts.{k}", f"count must be an integer >= 0, got {v!r}"))
        return issues


def _keywords_check(val: Any) -> Optional[str]:
    if not isinstance(val, list) or not val or not all(isinstance(k, str) and k for k in val):
        return "must be a non-empty list of keyword strings"
    return None


def _channels_check(val: Any) -> Optional[str]:
    if len(val) != 2 or not all(isinstance(c, int) and c > 0 for c in val):
        return "must be two positive channel counts"
    return None


_COMMON_RULES = [
    FieldRule("seed", (int,), low=0, high=2**64 - 1),
    FieldRule("threads", (int,), low=1),
    FieldRule("out", (str,)),
]

_DATASET_RULES = [
    FieldRule("dataset.seed", (int,), low=0, high=2**64 - 1),
    FieldRule("dataset.keywords", (list,), check=_keywords_check),
    FieldRule("dataset.positive_fraction", (int, float), low=0.0, high=1.0),
    FieldRule("dataset.max_duration_s", (int, float), low=0.0, low_exclusive=True, required=False),
    FieldRule("dataset.max_order", (int,), low=0, high=60),
]

_MODEL_RULES = [
    FieldRule("model.mask_subnet", (str,), choices=MASK_SUBNETS),
    FieldRule("model.kernel", (int,), low=1),
    FieldRule("model.n_mels", (int,), low=1),
    FieldRule("model.conv_channels", (list,), check=_channels_check),
    FieldRule("model.embed_dim", (int,), low=1),
    FieldRule("model.upsample_stride", (int,), low=1),
    FieldRule("model.heads", (int,), choices=(1,)),
]

_TRAIN_RULES = [
    FieldRule("train.manifest", (str,)),
    FieldRule("train.epochs", (int,), low=1),
    FieldRule("train.max_steps", (int,), low=1, required=False),
    FieldRule("train.batch_size", (int,), low=2),
    FieldRule("train.learning_rate", (int, float), low=0.0, low_exclusive=True),
    FieldRule("train.validation_fraction", (int, float), low=0.0, high=0.9),
    FieldRule("train.phoneme_weight", (int, float), low=0.0),
]

_EVAL_RULES = [
    FieldRule("eval.manifest", (str,)),
    FieldRule("eval.checkpoint", (str,)),
    FieldRule("eval.roc_svg", (bool,)),
]

_AEC_RULES = [
    FieldRule("aec.enabled", (bool,)),
    FieldRule("aec.taps", (int,), low=1),
    FieldRule("aec.step", (int, float), low=0.0, high=2.0, low_exclusive=True),
    FieldRule("aec.eps", (int, float), low=0.0, low_exclusive=True),
]
