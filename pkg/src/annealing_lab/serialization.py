"""Deterministic text output.

Floats are written with 17 significant digits so every value round-trips
exactly; JSON is emitted by a small hand-rolled writer because the stdlib
encoder does not expose float formatting.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import SchemaError


def fmt_float(x: float) -> str:
    x = float(x)
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _to_builtin(obj: Any) -> Any:
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps_json(obj: Any, indent: int = 2) -> str:
    """Serialize ``obj`` to JSON with 17-significant-digit floats."""
    out = io.StringIO()

    def emit(o: Any, level: int) -> None:
        o = _to_builtin(o)
        pad = " " * (indent * (level + 1))
        end = " " * (indent * level)
        if o is None or isinstance(o, bool):
            out.write(json.dumps(o))
        elif isinstance(o, int):
            out.write(str(o))
        elif isinstance(o, float):
            out.write(fmt_float(o))
        elif isinstance(o, str):
            out.write(json.dumps(o))
        elif isinstance(o, Mapping):
            if not o:
                out.write("{}")
                return
            out.write("{\n")
            for k, (key, val) in enumerate(o.items()):
                out.write(pad + json.dumps(str(key)) + ": ")
                emit(val, level + 1)
                out.write(",\n" if k < len(o) - 1 else "\n")
            out.write(end + "}")
        elif isinstance(o, (list, tuple)):
            if not o:
                out.write("[]")
                return
            # flat numeric lists stay on one line
            if all(isinstance(_to_builtin(v), (int, float)) and not isinstance(v, bool) for v in o):
                out.write("[")
                for k, v in enumerate(o):
                    emit(v, level + 1)
                    if k < len(o) - 1:
                        out.write(", ")
                out.write("]")
                return
            out.write("[\n")
            for k, v in enumerate(o):
                out.write(pad)
                emit(v, level + 1)
                out.write(",\n" if k < len(o) - 1 else "\n")
            out.write(end + "]")
        else:
            raise TypeError(f"cannot serialize {type(o).__name__}")

    emit(obj, 0)
    out.write("\n")
    return out.getvalue()


def write_json(path: str | Path, obj: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps_json(obj))
    return path


def read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def _cell(v: Any) -> str:
    v = _to_builtin(v)
    if isinstance(v, float):
        return fmt_float(v)
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def write_csv(
    path: str | Path,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    meta: Mapping[str, Any] | None = None,
) -> Path:
    """Write a CSV file; ``meta`` becomes a leading ``# key=value`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    if meta:
        buf.write("# " + " ".join(f"{k}={_cell(v)}" for k, v in meta.items()) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    path.write_text(buf.getvalue())
    return path


def read_csv(path: str | Path) -> tuple[dict[str, str], list[dict[str, str]]]:
    """Return (meta, rows) for a file written by :func:`write_csv`."""
    lines = Path(path).read_text().splitlines()
    meta: dict[str, str] = {}
    if lines and lines[0].startswith("#"):
        for tok in lines[0][1:].split():
            k, _, v = tok.partition("=")
            meta[k] = v
        lines = lines[1:]
    rows = list(csv.DictReader(lines))
    return meta, rows


def config_hash(config: Mapping[str, Any]) -> str:
    """Stable short hash of a configuration mapping."""
    canon = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _canonical(o: Any) -> Any:
    o = _to_builtin(o)
    if isinstance(o, Mapping):
        return {str(k): _canonical(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_canonical(v) for v in o]
    if isinstance(o, float):
        return fmt_float(o)
    return o
