"""Reading and writing data tensors.

The JSON layout is ``{"format": "pdtomo-tensor-v1", "m", "d", "shape",
"values", "provenance"}`` with ``values`` flattened row-major, the same
order :func:`pdtomo.tensor.flatten` uses. Floats are written with Python's
shortest round-trip repr, so a save/load cycle is bit-exact.

Small lab data sets (one or two qudits) can also be read from CSV files
with columns ``a,i,value`` or ``a,i,j,value``.
"""
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .model import DataTensor

TENSOR_FORMAT = "pdtomo-tensor-v1"


def _finite_or_none(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _finite_or_none(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite_or_none(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite_or_none(obj.item())
    return obj


def dumps(obj):
    """Canonical JSON text: sorted keys, two-space indent, non-finite floats as null."""
    return json.dumps(_finite_or_none(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_text(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def tensor_to_dict(tensor):
    return {
        "format": TENSOR_FORMAT,
        "m": tensor.m,
        "d": tensor.d,
        "shape": list(tensor.shape),
        "values": [float(v) for v in tensor.values.ravel(order="C")],
        "provenance": tensor.provenance,
    }


def tensor_from_dict(obj):
    if obj.get("format") != TENSOR_FORMAT:
        raise ValueError(f"not a {TENSOR_FORMAT} document (format={obj.get('format')!r})")
    shape = tuple(int(n) for n in obj["shape"])
    values = np.asarray(obj["values"], dtype=float)
    if values.size != math.prod(shape):
        raise ValueError(f"{values.size} values do not fill shape {shape}")
    return DataTensor(int(obj["m"]), int(obj["d"]), values.reshape(shape), dict(obj.get("provenance", {})))


def save_tensor(tensor, path):
    write_text(dumps(tensor_to_dict(tensor)), path)


def read_csv_tensor(path, d):
    """Dense tensor from a CSV of ``a,i[,j],value`` rows (0-based setting indices)."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        fields = [f.strip() for f in reader.fieldnames or []]
        axes = fields[:-1]
        if fields[-1:] != ["value"] or axes not in (["a", "i"], ["a", "i", "j"]):
            raise ValueError(f"CSV header must be a,i,value or a,i,j,value; got {','.join(fields)}")
        entries = {}
        for line, row in enumerate(reader, start=2):
            row = {k.strip(): v for k, v in row.items()}
            idx = tuple(int(row[ax]) for ax in axes)
            if min(idx) < 0:
                raise ValueError(f"line {line}: negative setting index")
            if idx in entries:
                raise ValueError(f"line {line}: duplicate entry for settings {idx}")
            entries[idx] = float(row["value"])
    if not entries:
        raise ValueError("CSV file has no data rows")
    shape = tuple(max(idx[n] for idx in entries) + 1 for n in range(len(axes)))
    if len(entries) != math.prod(shape):
        raise ValueError(f"CSV covers {len(entries)} of the {math.prod(shape)} entries of shape {shape}")
    values = np.empty(shape)
    for idx, v in entries.items():
        values[idx] = v
    provenance = {"source": "ingested", "file": Path(path).name}
    return DataTensor(len(axes) - 1, d, values, provenance)


def load_tensor(path, d=None):
    """Read a tensor from ``.json`` or ``.csv``; CSV files need the qudit dimension ``d``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if d is None:
            raise ValueError("CSV input carries no qudit dimension; pass d")
        return read_csv_tensor(path, d)
    return tensor_from_dict(json.loads(path.read_text()))
