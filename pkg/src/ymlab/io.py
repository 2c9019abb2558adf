"""Deterministic text output: 17-significant-digit numbers in CSV and JSON."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import re

import numpy as np

_MARK = "@@f17@@"
_MARK_RE = re.compile(r'"' + _MARK + r'([^"]*)"')


def fmt(x) -> str:
    """Full-precision decimal (17 significant digits); nan/inf spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


def _mark(obj):
    if isinstance(obj, dict):
        return {str(k): _mark(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_mark(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _mark(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _MARK + fmt(obj) if math.isfinite(obj) else None
    return obj


def dumps(obj, indent: int = 2) -> str:
    """JSON with every float written to 17 significant digits (non-finite -> null)."""
    text = json.dumps(_mark(obj), indent=indent, ensure_ascii=False)
    return _MARK_RE.sub(lambda m: m.group(1), text) + "\n"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
