"""Small shared helpers: deterministic JSON, digests, RNG streams."""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np


def canonical_json(obj) -> str:
    """Serialize with sorted keys and fixed separators so digests are stable."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def write_json(path: str | Path, obj, indent: int = 2) -> None:
    Path(path).write_text(json.dumps(obj, sort_keys=True, indent=indent) + "\n")


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def sha256_array(arr: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(str(arr.dtype).encode())
    h.update(str(arr.shape).encode())
    h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()


def digest_tree(root: str | Path) -> str:
    """Digest of every regular file under `root`, keyed by relative path."""
    root = Path(root)
    h = hashlib.sha256()
    for path in sorted(p for p in root.rglob("*") if p.is_file()):
        h.update(str(path.relative_to(root)).encode())
        h.update(sha256_file(path).encode())
    return h.hexdigest()


def stream(*key) -> np.random.Generator:
    """Deterministic RNG keyed by a tuple of non-negative integers.

    Keys like (seed, epoch, sample) give independent, reproducible streams
    regardless of consumption order elsewhere.
    """
    return np.random.default_rng(key)


def ensure_dir(path: str | Path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
