"""Deterministic report serialization.

A report is a tree of dicts, lists and scalars.  Scalars are strings, ints,
bools or None; exact numbers are always carried as canonical strings.
"""

from __future__ import annotations

import json

__all__ = ["emit_report", "parse_structured", "normalize"]


def normalize(obj):
    """Convert tuples and exact scalars into plain JSON-compatible values."""
    if isinstance(obj, dict):
        return {str(k): normalize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [normalize(v) for v in obj]
    if obj is None or isinstance(obj, (bool, int, str)):
        return obj
    return str(obj)


def _scalar(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _text_lines(obj, indent: int, out: list[str]):
    pad = "  " * indent
    if isinstance(obj, dict):
        for k in sorted(obj):
            v = obj[k]
            if isinstance(v, (dict, list)) and v:
                out.append(f"{pad}{k}:")
                _text_lines(v, indent + 1, out)
            elif isinstance(v, dict):
                out.append(f"{pad}{k}: {{}}")
            elif isinstance(v, list):
                out.append(f"{pad}{k}: []")
            else:
                out.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        if all(not isinstance(v, (dict, list)) for v in obj) and sum(len(_scalar(v)) for v in obj) < 60:
            out.append(f"{pad}[" + ", ".join(_scalar(v) for v in obj) + "]")
            return
        for v in obj:
            if isinstance(v, (dict, list)):
                out.append(f"{pad}-")
                _text_lines(v, indent + 1, out)
            else:
                out.append(f"{pad}- {_scalar(v)}")
    else:
        out.append(f"{pad}{_scalar(obj)}")


def emit_report(report: dict, fmt: str = "text") -> bytes:
    """Canonical bytes for ``report`` in the ``text`` or ``structured`` (JSON) format."""
    data = normalize(report)
    if fmt == "structured":
        return (json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode()
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines: list[str] = []
    _text_lines(data, 0, lines)
    return ("\n".join(lines) + "\n").encode()


def parse_structured(data: bytes | str) -> dict:
    return json.loads(data)
