"""Deterministic artifact writing: atomic replace, fixed float formatting.

All emitted files must be byte-identical across reruns with equal seeds, so
floats are rendered with 17 significant digits (exact round-trip), text uses
LF endings, JSON keys keep insertion order, and nothing timestamps itself.
"""

from __future__ import annotations

import json
import os
import tempfile


def fmt_float(x: float) -> str:
    """17-significant-digit rendering; round-trips every finite double."""
    return format(float(x), ".17g")


def atomic_write_bytes(path: str, data: bytes) -> None:
    """Write via a temp file in the same directory, then rename over."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str, payload: dict) -> None:
    atomic_write_text(path, json.dumps(payload, indent=2, allow_nan=True) + "\n")
