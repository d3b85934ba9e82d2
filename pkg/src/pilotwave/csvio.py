"""Fixed-schema CSV files and the run manifest."""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

FLOAT_FORMAT = "%.16e"  # 17 significant digits: lossless for doubles

__all__ = ["format_value", "write_csv", "read_csv", "config_hash", "write_manifest"]


def format_value(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return FLOAT_FORMAT % v


def write_csv(path, header, rows):
    """Write ``rows`` under a fixed header; floats in 17-digit scientific notation."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if len(row) != len(header):
                raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
            w.writerow([format_value(v) for v in row])
    return path


def _parse(s):
    if s.lstrip("-").isdigit():
        return int(s)
    return float(s)


def read_csv(path):
    """(header, rows) with integer-looking fields as int and the rest as float."""
    with Path(path).open(newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        rows = [[_parse(s) for s in row] for row in r]
    return header, rows


def config_hash(doc) -> str:
    """sha256 of the canonical JSON form (sorted keys, no whitespace)."""
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(text.encode("ascii")).hexdigest()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating, float)):
        o = float(o)
        return o if math.isfinite(o) else str(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_manifest(path, manifest: dict):
    Path(path).write_text(json.dumps(_jsonable(manifest), indent=2, sort_keys=True) + "\n")
    return Path(path)
