"""Serialisation: CSV tables, JSON reports and flow checkpoints.

Floats go out with 17 significant digits, which round-trips IEEE doubles
exactly.  JSON has no NaN, so NaN and infinities become ``null``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, fields
from pathlib import Path

import numpy as np

from .flow_engine import FlowConfig, TimeSeries
from .sphere_geometry import ConformalFactor, Grid

CHECKPOINT_MAGIC = "# sigma2flow checkpoint v1"


def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def write_timeseries(path, series: TimeSeries) -> Path:
    return write_csv(path, series.columns, series.rows)


def jsonable(obj):
    """Recursively convert to JSON-safe builtins (NaN/inf -> None)."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if hasattr(obj, "value") and hasattr(obj, "name"):  # Enum
        return obj.value
    return obj


def write_json(path, payload: dict) -> Path:
    path = Path(path)
    path.write_text(json.dumps(jsonable(payload), indent=2, sort_keys=True) + "\n")
    return path


def write_checkpoint(path, cf: ConformalFactor, t: float, config: FlowConfig | None = None) -> Path:
    """Self-describing text record: header, ``key=value`` lines, then one u per line."""
    lines = [CHECKPOINT_MAGIC, f"n_cells={cf.grid.n_cells}", f"t={fmt(t)}"]
    if config is not None:
        for f in fields(config):
            v = getattr(config, f.name)
            lines.append(f"config.{f.name}={'none' if v is None else fmt(v)}")
    lines.append("u:")
    lines.extend(fmt(x) for x in cf.u)
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path


def _parse_value(text: str, like):
    if text == "none":
        return None
    if like is None:
        return int(text)
    if isinstance(like, bool):
        return text == "true"
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    return text


def read_checkpoint(path):
    """Inverse of :func:`write_checkpoint`; returns ``(cf, t, config_or_None)``."""
    text = Path(path).read_text().splitlines()
    if not text or text[0] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint file")
    meta, i = {}, 1
    while text[i] != "u:":
        key, _, val = text[i].partition("=")
        meta[key] = val
        i += 1
    u = np.array([float(x) for x in text[i + 1:] if x.strip()])
    grid = Grid(int(meta["n_cells"]))
    cfg_items = {k[len("config."):]: v for k, v in meta.items() if k.startswith("config.")}
    config = None
    if cfg_items:
        defaults = asdict(FlowConfig(eps=0.5))
        kwargs = {k: _parse_value(v, defaults.get(k, 0.0)) for k, v in cfg_items.items()}
        config = FlowConfig(**kwargs)
    return ConformalFactor(grid, u), float(meta["t"]), config
