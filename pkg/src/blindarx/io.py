"""Series CSV (``t,y[,u]``, 1-based ``t``) and JSON helpers."""

from __future__ import annotations

import csv
import json
import math
from importlib import resources

import numpy as np


class SeriesFormatError(ValueError):
    pass


def write_series(path, y, u=None) -> None:
    y = np.asarray(y, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if u is None:
            w.writerow(["t", "y"])
            for t, yv in enumerate(y, start=1):
                w.writerow([t, repr(float(yv))])
        else:
            u = np.asarray(u, dtype=float)
            w.writerow(["t", "y", "u"])
            for t, (yv, uv) in enumerate(zip(y, u), start=1):
                w.writerow([t, repr(float(yv)), repr(float(uv))])


def read_series(path):
    """Return ``(y, u)``; ``u`` is None when the file has no ``u`` column."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in (reader.fieldnames or [])]
        if "y" not in fields or "t" not in fields:
            raise SeriesFormatError(f"{path}: header must contain 't' and 'y', got {fields}")
        reader.fieldnames = fields
        ys, us = [], []
        for i, row in enumerate(reader, start=1):
            try:
                t = int(row["t"])
                yv = float(row["y"])
                uv = float(row["u"]) if "u" in fields else None
            except (TypeError, ValueError):
                raise SeriesFormatError(f"{path}: malformed data on row {i}") from None
            if t != i:
                raise SeriesFormatError(f"{path}: row {i} has t={t}; t must run 1, 2, ...")
            if not math.isfinite(yv) or (uv is not None and not math.isfinite(uv)):
                raise SeriesFormatError(f"{path}: non-finite value on row {i}")
            ys.append(yv)
            us.append(uv)
    if not ys:
        raise SeriesFormatError(f"{path}: no samples")
    u = np.array(us, dtype=float) if "u" in fields else None
    return np.array(ys), u


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def dump_json(obj, path=None) -> str:
    text = json.dumps(_jsonable(obj), indent=2) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def load_schema(name: str) -> dict:
    return json.loads(resources.files("blindarx.schemas").joinpath(f"{name}.schema.json").read_text())
