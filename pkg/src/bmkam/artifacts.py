"""Output helpers: atomic file writes, CSV tables and JSON documents."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_atomic(path, text: str) -> Path:
    """Write through a temporary file in the same directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def dumps(doc: dict) -> str:
    body = {"schema_version": SCHEMA_VERSION}
    body.update(_clean(doc))
    return json.dumps(body, indent=2, sort_keys=False) + "\n"


def write_json(path, doc: dict) -> Path:
    return write_atomic(path, dumps(doc))


def write_jsonl(path, records) -> Path:
    lines = []
    for r in records:
        body = {"schema_version": SCHEMA_VERSION}
        body.update(_clean(r))
        lines.append(json.dumps(body, sort_keys=False))
    return write_atomic(path, "\n".join(lines) + ("\n" if lines else ""))


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return write_atomic(path, buf.getvalue())
