"""Dataset emission: CSV with a commented JSON header, or JSON.

Complex numbers are written as ``[re, im]`` pairs, floats with ``repr`` so
reruns are byte-identical. Files are written to a temporary sibling and moved
into place with ``os.replace``.
"""

from __future__ import annotations

import csv
import datetime as _dt
import enum
import hashlib
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .errors import ConfigError

# keys that change how a run executes but not what it computes
RUNTIME_KEYS = frozenset({"threads", "out", "format", "deterministic", "config", "hist_out", "verbose"})


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy and complex values into JSON-native types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _canonical(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: Dict[str, Any]) -> str:
    """sha256 (first 16 hex digits) of the canonical config, runtime keys excluded."""
    payload = {k: v for k, v in config.items() if k not in RUNTIME_KEYS}
    return hashlib.sha256(_canonical(payload).encode()).hexdigest()[:16]


def metadata(command: str, config: Dict[str, Any], deterministic: bool, extra: Optional[dict] = None) -> dict:
    from . import __version__

    meta = {
        "command": command,
        "version": __version__,
        "config_hash": config_hash(config),
        "seed": config.get("seed"),
        "config": {k: v for k, v in config.items() if k not in RUNTIME_KEYS},
    }
    if extra:
        meta.update(extra)
    if not deterministic:
        meta["timestamp"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return to_jsonable(meta)


@dataclass
class Dataset:
    """Rows with a fixed column schema, or a JSON payload."""

    kind: str
    columns: Sequence[str] = ()
    rows: List[Sequence[Any]] = field(default_factory=list)
    payload: Optional[dict] = None


def _cell(value) -> str:
    value = to_jsonable(value)
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return json.dumps(value)
    return str(value)


def render_csv(dataset: Dataset, meta: dict) -> str:
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(dataset.columns)
    for row in dataset.rows:
        if len(row) != len(dataset.columns):
            raise ValueError(f"row of length {len(row)} does not match columns {list(dataset.columns)}")
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def render_json(dataset: Dataset, meta: dict) -> str:
    if dataset.payload is not None:
        body = dataset.payload
    else:
        body = {"columns": list(dataset.columns), "rows": [list(r) for r in dataset.rows]}
    doc = {"metadata": meta, "data": to_jsonable(body)}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"


def atomic_write(path, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def infer_format(path, fmt: Optional[str]) -> str:
    if fmt:
        fmt = fmt.lower()
        if fmt not in ("csv", "json"):
            raise ConfigError(f"unknown output format {fmt!r}")
        return fmt
    return "json" if str(path).lower().endswith(".json") else "csv"


def emit(dataset: Dataset, fmt: str, path, meta: dict) -> None:
    """Write a dataset; CSV needs tabular rows, JSON takes either form."""
    if fmt == "csv":
        if dataset.payload is not None and not dataset.columns:
            raise ConfigError(f"{dataset.kind} output has no tabular form; use JSON")
        text = render_csv(dataset, meta)
    elif fmt == "json":
        text = render_json(dataset, meta)
    else:
        raise ConfigError(f"unknown output format {fmt!r}")
    atomic_write(path, text)


def read_csv(path):
    """Parse an emitted CSV back into ``(metadata, columns, rows)``."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("# "):
        raise ValueError(f"{path} has no metadata header")
    meta = json.loads(lines[0][2:])
    reader = csv.reader(lines[1:])
    columns = next(reader)
    return meta, columns, [row for row in reader]
