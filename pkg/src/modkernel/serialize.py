"""Parameter documents, canonical JSON, and deterministic CSV emission.

Parameters serialize to a JSON document listing (name, shape, row-major
values).  JSON is always dumped canonically (sorted keys, two-space
indent, trailing newline) and floats use Python's shortest round-trip
repr, so identical state produces identical bytes.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import IngestionError

PARAMS_FORMAT = "modkernel-params-v1"
MODULE_FORMAT = "modkernel-module-v1"


def params_to_document(named_params) -> dict:
    """``named_params``: iterable of (name, tensor-or-array)."""
    tensors = []
    for name, param in named_params:
        arr = np.asarray(getattr(param, "data", param), dtype=np.float64)
        tensors.append({
            "name": str(name),
            "shape": list(arr.shape),
            "values": [float(v) for v in arr.ravel()],
        })
    return {"format": PARAMS_FORMAT, "tensors": tensors}


def document_to_params(doc: dict) -> list:
    if doc.get("format") != PARAMS_FORMAT:
        raise IngestionError(
            f"unexpected parameter document format: {doc.get('format')!r}")
    out = []
    for entry in doc["tensors"]:
        arr = np.asarray(entry["values"], dtype=np.float64)
        arr = arr.reshape(entry["shape"])
        out.append((entry["name"], arr))
    return out


def dump_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dump_json(obj))


def read_json(path) -> dict:
    return json.loads(Path(path).read_text())


def save_params(path, named_params) -> None:
    write_json(path, params_to_document(named_params))


def load_params(path) -> list:
    return document_to_params(read_json(path))


def _format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        v = float(value)
        return "nan" if math.isnan(v) else repr(v)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return "" if value is None else str(value)


def write_csv(path, header, rows) -> None:
    """Rows are sequences aligned with ``header``; floats use repr."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_format_cell(v) for v in row])
