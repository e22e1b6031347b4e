"""Deterministic text output: shortest round-trip floats, sorted JSON."""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np


def fmt(x) -> str:
    x = float(x)
    if x == 0.0:
        return "0.0"
    return repr(x)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if not math.isfinite(value):
            return None
        return 0.0 if value == 0.0 else value
    if isinstance(obj, Path):
        return obj.as_posix()
    return obj


def dumps(payload) -> str:
    return json.dumps(to_jsonable(payload), indent=2, sort_keys=True) + "\n"


def write_json(payload, path: Path) -> None:
    Path(path).write_text(dumps(payload), encoding="utf-8")


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_columns(path: Path, header: list[str], columns) -> None:
    """Write equal-length numeric columns as CSV."""
    cols = [np.asarray(c) for c in columns]
    lines = [",".join(header)]
    for row in zip(*cols):
        lines.append(",".join(str(int(v)) if isinstance(v, (bool, np.bool_)) else fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
