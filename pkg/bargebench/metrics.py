"""Sample-level ROC, AUC, EER and MAE, and the per-scenario EvalReport."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.metrics import auc as trapezoid_area
from sklearn.metrics import roc_curve

from .errors import ConfigError, EmptyInputError, NotApplicableError, ShapeError
from .room.scenario import ScenarioKind

REPORT_FORMAT = "bargebench-report"
REPORT_VERSION = 1
CSV_COLUMNS = ("kind", "auc", "eer", "mae", "n")

# Rank metrics are undefined when every label is 0.
MAE_ONLY_KINDS = (ScenarioKind.SELF_REFERENCING.value,)


@dataclass(frozen=True)
class ScoredSet:
    """Scores in [0, 1] with binary labels for one scenario kind."""

    scores: np.ndarray
    labels: np.ndarray
    kind: str = ""

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64).reshape(-1)
        y = np.asarray(self.labels, dtype=np.float64).reshape(-1)
        if s.size == 0:
            raise EmptyInputError("scores", "scored set is empty")
        if s.shape != y.shape:
            raise ShapeError("labels", f"{y.size} labels for {s.size} scores")
        if not np.all(np.isin(y, (0.0, 1.0))):
            raise ConfigError("labels", "labels must be 0 or 1")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "labels", y.astype(np.int64))

    @property
    def n(self) -> int:
        return int(self.scores.size)

    @property
    def has_both_classes(self) -> bool:
        return 0 < int(self.labels.sum()) < self.n


def _require_both(s: ScoredSet, metric: str) -> None:
    if not s.has_both_classes:
        raise NotApplicableError(metric, f"needs positive and negative labels (kind={s.kind or '?'})")


def _roc_arrays(s: ScoredSet) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    _require_both(s, "roc")
    # every distinct score is a threshold; ties fall into one step
    fpr, tpr, thresholds = roc_curve(s.labels, s.scores, drop_intermediate=False)
    return fpr, tpr, thresholds


def roc(s: ScoredSet) -> List[Tuple[float, float]]:
    """(FPR, TPR) staircase from (0, 0) to (1, 1), one point per distinct score."""
    fpr, tpr, _ = _roc_arrays(s)
    return [(float(a), float(b)) for a, b in zip(fpr, tpr)]


def auc(s: ScoredSet) -> float:
    """Trapezoidal area under roc(); equals Mann-Whitney with ties counted 1/2."""
    fpr, tpr, _ = _roc_arrays(s)
    return float(trapezoid_area(fpr, tpr))


def eer(s: ScoredSet) -> Tuple[float, float]:
    """Equal error rate and its threshold.

    FNR - FPR falls from 1 to -1 along the staircase; the crossing is linearly
    interpolated inside the first segment where it reaches 0.
    """
    fpr, tpr, thresholds = _roc_arrays(s)
    d = (1.0 - tpr) - fpr
    i = int(np.argmax(d <= 0.0))
    if d[i] == 0.0:
        return float(fpr[i]), float(thresholds[i])
    t = d[i - 1] / (d[i - 1] - d[i])
    rate = fpr[i - 1] + t * (fpr[i] - fpr[i - 1])
    lo, hi = thresholds[i - 1], thresholds[i]
    threshold = hi if not math.isfinite(lo) else lo + t * (hi - lo)
    return float(rate), float(threshold)


def mae(s: ScoredSet) -> float:
    return float(np.mean(np.abs(s.scores - s.labels)))


@dataclass
class KindMetrics:
    kind: str
    mae: float
    n: int
    auc: Optional[float] = None
    eer: Optional[float] = None
    eer_threshold: Optional[float] = None
    roc: List[Tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "auc": self.auc,
            "eer": self.eer,
            "eer_threshold": self.eer_threshold,
            "mae": self.mae,
            "n": self.n,
            "roc": [[a, b] for a, b in self.roc],
        }


def score_kind(s: ScoredSet) -> KindMetrics:
    """All metrics for one kind; SelfReferencing and single-class sets carry MAE only."""
    m = KindMetrics(kind=s.kind, mae=mae(s), n=s.n)
    if s.kind in MAE_ONLY_KINDS or not s.has_both_classes:
        return m
    m.auc = auc(s)
    m.eer, m.eer_threshold = eer(s)
    m.roc = roc(s)
    return m


@dataclass
class EvalReport:
    """Per-kind metric bundle in scenario order, plus free-form provenance metadata."""

    kinds: Dict[str, KindMetrics]
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_sets(cls, sets: Sequence[ScoredSet], metadata: Optional[Dict[str, Any]] = None) -> EvalReport:
        order = {k.value: i for i, k in enumerate(ScenarioKind)}
        ordered = sorted(sets, key=lambda s: (order.get(s.kind, len(order)), s.kind))
        return cls({s.kind: score_kind(s) for s in ordered}, dict(metadata or {}))

    def to_json(self) -> Dict[str, Any]:
        return {
            "format": REPORT_FORMAT,
            "version": REPORT_VERSION,
            "metadata": self.metadata,
            "kinds": {k: m.to_dict() for k, m in self.kinds.items()},
        }

    @classmethod
    def from_json(cls, data: Dict[str, Any]) -> EvalReport:
        if data.get("format") != REPORT_FORMAT:
            raise ConfigError("report", f"not a {REPORT_FORMAT} document")
        if data.get("version") != REPORT_VERSION:
            raise ConfigError("report.version", f"unsupported version {data.get('version')}")
        kinds = {}
        for name, d in data.get("kinds", {}).items():
            kinds[name] = KindMetrics(
                kind=name,
                mae=d["mae"],
                n=d["n"],
                auc=d.get("auc"),
                eer=d.get("eer"),
                eer_threshold=d.get("eer_threshold"),
                roc=[(float(a), float(b)) for a, b in d.get("roc", [])],
            )
        return cls(kinds, dict(data.get("metadata") or {}))

    def to_csv(self) -> str:
        """kind, auc, eer, mae, n; undefined metrics are empty cells."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for k, m in self.kinds.items():
            w.writerow([k, _cell(m.auc), _cell(m.eer), _cell(m.mae), m.n])
        return buf.getvalue()


def _cell(v: Optional[float]) -> str:
    return "" if v is None else repr(float(v))
