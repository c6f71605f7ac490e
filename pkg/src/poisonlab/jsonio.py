"""Canonical JSON helpers shared by artifacts, the service, and the CLI.

All persisted artifacts and HTTP payloads are serialized through
:func:`canonical_dumps` so that identical inputs always produce identical
bytes, which the determinism guarantees and ETag computation rely on.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path
from typing import Any

import numpy as np


def to_plain(obj: Any) -> Any:
    """Recursively convert numpy scalars/arrays to plain Python values."""
    if isinstance(obj, np.ndarray):
        return [to_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, dict):
        return {k: to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    return obj


def canonical_dumps(obj: Any) -> str:
    """Serialize to the canonical JSON form: sorted keys, 2-space indent,
    newline-terminated. File artifacts and HTTP payloads share this exact
    byte form, which is what the byte-matching guarantees compare."""
    return (
        json.dumps(to_plain(obj), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
        + "\n"
    )


def canonical_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def payload_etag(obj: Any) -> str:
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


def config_hash(obj: Any) -> str:
    """Compact hash for config objects, used for cache keys and filenames."""
    compact = json.dumps(to_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(compact.encode("utf-8")).hexdigest()[:16]


def write_json(path: str | Path, obj: Any) -> None:
    """Atomically write canonical JSON (trailing newline) to ``path``."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(canonical_dumps(obj), encoding="utf-8")
    os.replace(tmp, path)


def read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))
