"""JSON parameter checkpoints: name -> shape + row-major values, version-tagged."""
from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Dict, Mapping, Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError, StorageError
from ..paths import atomic_write_text
from .tensor import DiffTensor

FORMAT = "bargebench-checkpoint"
VERSION = 1


def save_checkpoint(
    path: Path,
    params: Mapping[str, Union[np.ndarray, DiffTensor]],
    metadata: Optional[Dict[str, Any]] = None,
) -> Path:
    """Write atomically. Floats are serialized with repr, so values round-trip exactly."""
    body = {
        "format": FORMAT,
        "version": VERSION,
        "metadata": metadata or {},
        "params": {},
    }
    for name in sorted(params):
        v = params[name]
        arr = v.value if isinstance(v, DiffTensor) else np.asarray(v, dtype=np.float64)
        body["params"][name] = {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
    return atomic_write_text(path, json.dumps(body, sort_keys=True, separators=(",", ":")))


def load_checkpoint(path: Path) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    p = Path(path)
    if not p.exists():
        raise StorageError(str(p), "checkpoint not found")
    try:
        body = json.loads(p.read_text(encoding="utf-8"))
    except OSError as e:
        raise StorageError(str(p), f"cannot read checkpoint: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError("checkpoint", f"{p} is not valid JSON: {e.msg}") from e
    if body.get("format") != FORMAT:
        raise ConfigError("checkpoint", f"{p} is not a {FORMAT} file")
    if body.get("version") != VERSION:
        raise ConfigError("checkpoint.version", f"unsupported version {body.get('version')}, expected {VERSION}")
    params: Dict[str, np.ndarray] = {}
    for name, entry in body.get("params", {}).items():
        shape = tuple(entry["shape"])
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape, dtype=np.int64)):
            raise ConfigError(name, f"{values.size} values do not fill shape {shape}")
        params[name] = values.reshape(shape)
    return params, body.get("metadata", {})


def checkpoint_digest(path: Path) -> str:
    """SHA-256 of the checkpoint file bytes."""
    p = Path(path)
    try:
        return hashlib.sha256(p.read_bytes()).hexdigest()
    except OSError as e:
        raise StorageError(str(p), f"cannot read checkpoint: {e}") from e
