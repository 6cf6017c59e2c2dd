"""Embedding, label and report files.

Binary embeddings: a 16-byte header of two little-endian int64 values
``(n, d)`` followed by ``n * d`` little-endian float32 values, row-major.
Row ``i`` has id ``i``. CSV embeddings carry the id in the first column.
Labels are JSON-lines ``{"id": ..., "y": ...}``.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DecodeError
from .metrics import MetricSet

_HEADER = struct.Struct("<qq")


def write_embeddings(values, path, ids=None) -> None:
    values = np.asarray(values)
    path = Path(path)
    if path.suffix == ".csv":
        ids = range(len(values)) if ids is None else ids
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for i, row in zip(ids, values):
                writer.writerow([i, *(repr(float(v)) for v in row)])
        return
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*values.shape))
        fh.write(values.astype("<f4").tobytes())


def read_embeddings(path) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(ids, values)``."""
    path = Path(path)
    if path.suffix == ".csv":
        ids, rows = [], []
        with open(path, newline="") as fh:
            for lineno, row in enumerate(csv.reader(fh), 1):
                if not row:
                    continue
                try:
                    ids.append(int(row[0]))
                    rows.append([float(v) for v in row[1:]])
                except ValueError as exc:
                    raise DecodeError(f"{path}:{lineno}: {exc}") from exc
        values = np.array(rows, dtype=np.float64)
        if values.ndim != 2:
            raise DecodeError(f"{path}: rows have differing lengths")
        return np.array(ids, dtype=np.int64), values
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DecodeError(f"{path}: truncated header")
    n, d = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f4", offset=_HEADER.size)
    if n < 0 or d < 1 or body.size != n * d:
        raise DecodeError(f"{path}: header says {n}x{d}, found {body.size} values")
    return np.arange(n, dtype=np.int64), body.reshape(n, d).astype(np.float64)


def write_labels(ids, ys, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for i, y in zip(ids, ys):
            y = y.tolist() if isinstance(y, np.ndarray) else y
            fh.write(json.dumps({"id": int(i), "y": y}) + "\n")


def read_labels(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                out[int(obj["id"])] = obj["y"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DecodeError(f"{path}:{lineno}: bad label: {exc}") from exc
    return out


def align(ids, values, labels: dict):
    missing = [int(i) for i in ids if int(i) not in labels]
    if missing:
        raise DecodeError(f"no labels for ids {missing[:10]}")
    ys = [labels[int(i)] for i in ids]
    return values, np.asarray(ys)


def format_table(metrics: MetricSet) -> str:
    rows = [("metric", "mean", "std")]
    for name, mean in metrics.mean.items():
        std = metrics.std.get(name) if metrics.std else None
        rows.append((name, f"{mean:.4f}", "-" if std is None else f"{std:.4f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(3)]
    lines = []
    for j, r in enumerate(rows):
        lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                               for i, (c, w) in enumerate(zip(r, widths))))
        if j == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
