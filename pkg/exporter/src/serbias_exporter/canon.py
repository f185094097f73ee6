"""Canonical serialization, bit-exact with the audit toolkit's readers.

The exporter talks to the toolkit only through files, so this module
reimplements the canonical form instead of importing it: JSON with sorted
keys, no padding whitespace, floats at 9 significant digits, one record per
line, single trailing newline.
"""

from __future__ import annotations

import json
import math


def format_float(value: float) -> str:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value!r} cannot be serialized")
    if value == 0.0:
        value = 0.0
    return format(value, ".9g")


def canonical_json(obj) -> str:
    parts: list[str] = []
    _write(obj, parts)
    return "".join(parts)


def _write(obj, parts: list[str]) -> None:
    if isinstance(obj, dict):
        parts.append("{")
        for i, key in enumerate(sorted(obj)):
            if i:
                parts.append(",")
            parts.append(json.dumps(key))
            parts.append(":")
            _write(obj[key], parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, item in enumerate(obj):
            if i:
                parts.append(",")
            _write(item, parts)
        parts.append("]")
    elif isinstance(obj, bool):
        parts.append("true" if obj else "false")
    elif obj is None:
        parts.append("null")
    elif isinstance(obj, float):
        parts.append(format_float(obj))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    else:
        raise ValueError(f"cannot serialize {type(obj).__name__} value {obj!r}")
