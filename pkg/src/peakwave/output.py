"""Deterministic CSV/JSON writers with atomic replacement."""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Sequence

__all__ = ["config_hash", "format_value", "write_csv", "write_json", "atomic_write_text"]


def _canonical(obj: Any) -> Any:
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, complex):
        return [_canonical(obj.real), _canonical(obj.imag)]
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalars
        return _canonical(obj.item())
    return obj


def config_hash(config: dict) -> str:
    text = json.dumps(_canonical(config), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def format_value(v: Any) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if hasattr(v, "item"):
        v = v.item()
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence[Any]], config: dict) -> int:
    """Write a header, the rows, and a trailing '# config-hash' comment. Returns the row count."""
    lines = [",".join(header)]
    count = 0
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        cells = []
        for v in row:
            cell = format_value(v)
            if "," in cell or '"' in cell:
                cell = '"' + cell.replace('"', '""') + '"'
            cells.append(cell)
        lines.append(",".join(cells))
        count += 1
    lines.append(f"# config-hash: {config_hash(config)}")
    atomic_write_text(path, "\n".join(lines) + "\n")
    return count


def write_json(path, payload: dict, config: dict) -> None:
    body = dict(_canonical(payload))
    body["config_hash"] = config_hash(config)
    atomic_write_text(path, json.dumps(body, sort_keys=True, indent=2) + "\n")
