"""Deterministic report serialization.

Two runs of the same scenario must produce byte-identical summary.json,
so floats are rendered with a fixed 17-significant-digit format, keys are
sorted, and nothing time- or machine-dependent enters the summary (those
go to meta.json).  Non-finite values are serialized as the strings
"nan", "inf", "-inf".
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np


def format_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    if x == 0.0:
        x = 0.0  # normalize -0.0
    return format(x, ".17g")


def _serialize(obj) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, bool) or isinstance(obj, np.bool_):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, str):
        out = io.StringIO()
        out.write('"')
        for ch in obj:
            if ch == '"':
                out.write('\\"')
            elif ch == "\\":
                out.write("\\\\")
            elif ord(ch) < 0x20:
                out.write(f"\\u{ord(ch):04x}")
            else:
                out.write(ch)
        out.write('"')
        return out.getvalue()
    if isinstance(obj, np.ndarray):
        return _serialize(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_serialize(v) for v in obj) + "]"
    if isinstance(obj, dict):
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        return "{" + ", ".join(f"{_serialize(str(k))}: {_serialize(v)}" for k, v in items) + "}"
    raise TypeError(f"cannot serialize {type(obj)!r}")


def dumps(obj, indent: int = 0) -> str:
    """Deterministic JSON text (sorted keys, 17 significant digits)."""
    if indent <= 0:
        return _serialize(obj)
    return _pretty(obj, 0, indent)


def _pretty(obj, depth: int, indent: int) -> str:
    pad = " " * (indent * (depth + 1))
    closing = " " * (indent * depth)
    if isinstance(obj, dict) and obj:
        items = sorted(obj.items(), key=lambda kv: str(kv[0]))
        body = ",\n".join(
            f"{pad}{_serialize(str(k))}: {_pretty(v, depth + 1, indent)}" for k, v in items
        )
        return "{\n" + body + "\n" + closing + "}"
    if isinstance(obj, (list, tuple)) and len(obj) and any(
        isinstance(v, (dict, list, tuple)) for v in obj
    ):
        body = ",\n".join(f"{pad}{_pretty(v, depth + 1, indent)}" for v in obj)
        return "[\n" + body + "\n" + closing + "]"
    return _serialize(obj)


def write_json(path, obj, indent: int = 2) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(dumps(obj, indent=indent) + "\n")


def write_audit_jsonl(path, samples) -> None:
    """One JSON object per audit sample, in grid (row-major) order."""
    with open(path, "w", encoding="ascii") as fh:
        for s in samples:
            record = {
                "x": list(s.x),
                "eigsum": s.value,
                "grad_norm": s.grad_norm,
                "trace_term": s.trace_term,
                "form_bound_gap": s.form_bound_gap,
                "pair_bound_gap": s.pair_bound_gap,
                "equation_residuals": list(s.equation_residuals),
                "masked": s.masked,
            }
            fh.write(dumps(record) + "\n")


def write_rankmap_csv(path, samples) -> None:
    """Rows x1..xn, lambda1..lambdan, rank in row-major grid order."""
    if not samples:
        raise ValueError("no rank samples to write")
    n = samples[0].x.shape[0]
    header = [f"x{i + 1}" for i in range(n)] + [f"lambda{i + 1}" for i in range(n)] + ["rank"]
    with open(path, "w", encoding="ascii", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in samples:
            row = [format(v, ".17g") for v in s.x]
            row += [format(v, ".17g") for v in s.eigenvalues]
            row.append(str(s.rank))
            writer.writerow(row)
