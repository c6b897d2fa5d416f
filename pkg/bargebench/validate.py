from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

from .errors import ConfigError


@dataclass
class ConfigIssue:
    kind: str         # 'missing' | 'type' | 'range' | 'choice' | 'path_missing'
    name: str         # dotted config key
    message: str
    details: Optional[Dict[str, Any]] = None


class ConfigValidator:
    """Base class for config validators that collect issues without raising."""

    def run(self, config: Any) -> List[ConfigIssue]:
        raise NotImplementedError


@dataclass
class FieldRule:
    key: str
    types: Tuple[type, ...]
    low: Optional[float] = None
    high: Optional[float] = None
    choices: Optional[Sequence[Any]] = None
    required: bool = True
    low_exclusive: bool = False
    check: Optional[Callable[[Any], Optional[str]]] = field(default=None, repr=False)


class FieldValidator(ConfigValidator):
    """Validate presence, type, range and choice of dotted config keys."""

    def __init__(self, rules: List[FieldRule]) -> None:
        self.rules = list(rules)

    def run(self, config: Any) -> List[ConfigIssue]:
        issues: List[ConfigIssue] = []
        for r in self.rules:
            val = config.get(r.key)
            if val is None:
                if r.required:
                    issues.append(ConfigIssue("missing", r.key, f"{r.key} is required"))
                continue
            # bool is an int subclass; never accept it for numbers
            if not isinstance(val, r.types) or (isinstance(val, bool) and bool not in r.types):
                want = "|".join(t.__name__ for t in r.types)
                issues.append(ConfigIssue("type", r.key, f"{r.key} must be {want}, got {type(val).__name__}"))
                continue
            if r.choices is not None and val not in r.choices:
                issues.append(
                    ConfigIssue("choice", r.key, f"{r.key}={val!r} not in {list(r.choices)}", {"choices": list(r.choices)})
                )
                continue
            too_low = r.low is not None and (val <= r.low if r.low_exclusive else val < r.low)
            too_high = r.high is not None and val > r.high
            if too_low or too_high:
                lo = "(" if r.low_exclusive else "["
                issues.append(
                    ConfigIssue("range", r.key, f"{r.key}={val} outside {lo}{r.low}, {r.high}]", {"low": r.low, "high": r.high})
                )
                continue
            if r.check is not None:
                msg = r.check(val)
                if msg:
                    issues.append(ConfigIssue("range", r.key, f"{r.key}: {msg}"))
        return issues


class PathValidator(ConfigValidator):
    """Validate that path-valued keys resolve to existing files.

    ``skip`` values (e.g. ``"toy"``) mark built-in sources that need no file.
    """

    def __init__(self, keys: List[str], base: Path, skip: Sequence[str] = ()) -> None:
        self.keys = list(keys)
        self.base = Path(base)
        self.skip = set(skip)

    def run(self, config: Any) -> List[ConfigIssue]:
        issues: List[ConfigIssue] = []
        for key in self.keys:
            val = config.get(key)
            if val is None or val in self.skip:
                continue
            p = Path(val)
            if not p.is_absolute():
                p = self.base / p
            if not p.exists():
                issues.append(ConfigIssue("path_missing", key, f"{key}: {p} does not exist", {"path": str(p)}))
        return issues


def raise_for_issues(issues: List[ConfigIssue]) -> None:
    """Turn collected issues into a single ConfigError naming every field."""
    if not issues:
        return
    names = ", ".join(i.name for i in issues)
    lines = "; ".join(i.message for i in issues)
    raise ConfigError(names, lines, {"issues": [i.__dict__ for i in issues]})
