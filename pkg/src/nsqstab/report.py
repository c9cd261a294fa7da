"""Byte-stable JSON documents.

Field order is insertion order, floats are written with 17 significant
digits, and non-finite floats become the strings ``"Infinity"``,
``"-Infinity"`` and ``"NaN"``.  Equal inputs therefore give equal bytes.
"""

from __future__ import annotations

import dataclasses
import enum
import hashlib
import json
import math

import numpy as np

TOOL = "nsqstab"


def _float(x: float) -> str:
    if math.isnan(x):
        return '"NaN"'
    if math.isinf(x):
        return '"Infinity"' if x > 0 else '"-Infinity"'
    text = format(x, ".17g")
    if all(c in "-0123456789" for c in text):
        text += ".0"
    return text


def plain(obj):
    """Convert dataclasses, enums and numpy values into JSON-ready structures."""
    if isinstance(obj, enum.Enum):
        return obj.value
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)
                if f.repr}
    if isinstance(obj, dict):
        return {_key(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        return plain(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return plain(obj.item())
    return obj


def _key(k):
    if isinstance(k, tuple):
        return ",".join(str(int(x)) for x in k)
    return str(k)


def dumps(obj) -> str:
    """Serialize `obj` to compact, deterministic JSON text."""
    obj = plain(obj)
    parts = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_float(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for n, (k, v) in enumerate(obj.items()):
            if n:
                out.append(",")
            out.append(json.dumps(str(k), ensure_ascii=False))
            out.append(":")
            _emit(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for n, v in enumerate(obj):
            if n:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def matrix_hash(p, data) -> str:
    """Hash of a block structure and matrix entries (exact float bits)."""
    h = hashlib.sha256()
    h.update(repr(tuple(int(x) for x in p)).encode())
    h.update(np.ascontiguousarray(np.asarray(data, dtype="<f8")).tobytes())
    return h.hexdigest()
