"""Number formatting and metadata sidecars shared by all writers."""

import json
from pathlib import Path

import numpy as np


def fmt17(x) -> str:
    """Round-trippable float text (17 significant digits)."""
    x = float(x)
    if np.isnan(x):
        return ""
    return f"{x:.17g}"


def fmt10(x) -> str:
    return f"{float(x):.10g}"


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, Path):
        return str(obj)
    if hasattr(obj, "isoformat"):
        return obj.isoformat()
    return obj


def write_json(path, payload) -> None:
    text = json.dumps(to_jsonable(payload), indent=2, sort_keys=True)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_sidecar(path, metadata) -> Path:
    """Write ``<path>.meta.json`` next to an output file."""
    side = Path(str(path) + ".meta.json")
    write_json(side, metadata)
    return side
