"""Deterministic report and map serialization."""

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .transport import QuantileGrid, TransportMap


def _fmt_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    if x == int(x) and abs(x) < 1e16:
        return f"{x:.1f}"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_encode(str(k), indent, level + 1)}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=2) -> str:
    """JSON with sorted keys and floats at 17 significant digits (non-finite -> null)."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj))
    return path


def write_map_csv(path, T: TransportMap):
    """CSV with header i,j,u,t: coordinate, node index, node, value."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    u = T.grid.nodes
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["i", "j", "u", "t"])
        for i in range(T.dim):
            for j in range(u.size):
                w.writerow([i, j, format(u[j], ".17g"), format(T.values[i, j], ".17g")])
    return path


def read_map_csv(path, alpha=None, beta=None) -> TransportMap:
    path = Path(path)
    if not path.exists():
        raise InputError(f"map file not found: {path}")
    rows = list(csv.DictReader(path.open()))
    if not rows or set(rows[0]) != {"i", "j", "u", "t"}:
        raise InputError(f"{path}: expected header i,j,u,t")
    d = 1 + max(int(r["i"]) for r in rows)
    m = 1 + max(int(r["j"]) for r in rows)
    u = np.empty(m)
    vals = np.full((d, m), np.nan)
    for r in rows:
        i, j = int(r["i"]), int(r["j"])
        u[j] = float(r["u"])
        vals[i, j] = float(r["t"])
    if np.isnan(vals).any():
        raise InputError(f"{path}: incomplete map table")
    return TransportMap(QuantileGrid(u), vals, alpha, beta)
