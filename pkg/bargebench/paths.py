"""Path utilities: output confinement, manifest-relative paths and atomic writes."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Union

from .errors import StorageError

PathLike = Union[str, Path]

RESOLVED_CONFIG_NAME = "resolved_config.yaml"


def ensure_within(root: PathLike, path: PathLike) -> Path:
    """Resolve ``path`` and reject it unless it lies inside ``root``.

    Relative paths are taken relative to ``root``.

    Raises:
        StorageError: If the resolved path escapes the output directory
    """
    root_p = Path(root).resolve()
    p = Path(path)
    if not p.is_absolute():
        p = root_p / p
    p = p.resolve()
    if p != root_p and root_p not in p.parents:
        raise StorageError(str(path), f"write target escapes output directory {root_p}")
    return p


def resolve_relative(base: PathLike, path: PathLike) -> Path:
    """Resolve a manifest-style path against the directory it was written in."""
    p = Path(path)
    if p.is_absolute():
        return p
    return (Path(base) / p).resolve()


def relative_to(base: PathLike, path: PathLike) -> str:
    """Inverse of resolve_relative, always with forward slashes."""
    return Path(os.path.relpath(Path(path).resolve(), Path(base).resolve())).as_posix()


def atomic_write_bytes(path: PathLike, data: bytes) -> Path:
    """Write via a temp file in the same directory, then os.replace."""
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", suffix=".tmp", dir=str(p.parent))
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
                f.flush()
                os.fsync(f.fileno())
            os.replace(tmp, p)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise StorageError(str(p), f"cannot write: {e}") from e
    return p


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))
