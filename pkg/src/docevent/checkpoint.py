"""Checkpoint container: parameter arrays plus a JSON metadata blob.

Stored as an npz archive with a format-version entry. Round-trips are
bit-exact because arrays are written raw (no text conversion).
"""

from __future__ import annotations

import json

import numpy as np

FORMAT_VERSION = 1
_META_KEY = "__meta_json__"
_VERSION_KEY = "__format_version__"


def save_checkpoint(path: str, state: dict[str, np.ndarray], meta: dict) -> None:
    arrays = {_VERSION_KEY: np.array(FORMAT_VERSION, dtype=np.int64),
              _META_KEY: np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)}
    for name, arr in state.items():
        if name.startswith("__"):
            raise ValueError(f"parameter name {name!r} collides with reserved keys")
        arrays[name] = arr
    with open(path, "wb") as f:
        np.savez(f, **arrays)


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with np.load(path, allow_pickle=False) as z:
        if _VERSION_KEY not in z:
            raise ValueError(f"{path}: not a checkpoint (missing version header)")
        version = int(z[_VERSION_KEY])
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(z[_META_KEY].tobytes().decode())
        state = {k: z[k] for k in z.files if not k.startswith("__")}
    return state, meta
