"""Serialization of experiment reports: flat CSV tables and JSON documents."""

from __future__ import annotations

import csv
import dataclasses
import enum
import hashlib
import io
import json
import math
from fractions import Fraction
from pathlib import Path

import numpy as np

CSV_HEADER = (
    "experiment",
    "u",
    "numerator",
    "numerator_err",
    "denominator",
    "denominator_err",
    "ratio",
    "ratio_lo",
    "ratio_hi",
    "method",
)


def fmt(x) -> str:
    """Fixed 17-significant-digit rendering, so equal floats give equal bytes."""
    return "%.17g" % float(x)


def table_csv(experiment: str, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(
            [
                experiment,
                fmt(r.u),
                fmt(r.numerator),
                fmt(r.numerator_err),
                fmt(r.denominator),
                fmt(r.denominator_err),
                fmt(r.ratio),
                fmt(r.ratio_lo),
                fmt(r.ratio_hi),
                r.method,
            ]
        )
    return buf.getvalue()


def to_jsonable(obj):
    """Recursively convert reports to plain JSON types (non-finite floats as strings)."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, set, frozenset)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if dataclasses.is_dataclass(obj):
        return to_jsonable(obj.as_dict() if hasattr(obj, "as_dict") else dataclasses.asdict(obj))
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)


def sha256_file(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
