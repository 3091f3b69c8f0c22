"""
Output artifacts: CSV for point clouds and scans, JSON for structured results.

Floats are written with 17 significant digits and JSON keys are sorted, so
repeated runs on the same inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np
from pydantic import BaseModel

from nedlin.cli.config import ConfigError
from nedlin.primitives.models import ParamPoint


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])
    return path


def _plain(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return _plain(value.model_dump(mode="json", by_alias=True))
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(path: Path, payload: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(_plain(payload), indent=2, sort_keys=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def read_points(path: Path, dim: int) -> list[ParamPoint]:
    """
    Read ``tau, xi1, ..., xin`` rows; a header row is optional.

    Raises:
        ConfigError: Wrong column count or non-numeric cells.
    """
    if not path.is_file():
        raise ConfigError(f"No such file: {path}")
    points = []
    with path.open(encoding="utf-8", newline="") as handle:
        for number, row in enumerate(csv.reader(handle), start=1):
            if not row or (number == 1 and row[0].strip().lower() == "tau"):
                continue
            if len(row) != dim + 1:
                raise ConfigError(f"{path}:{number}: expected {dim + 1} columns, got {len(row)}")
            try:
                values = [float(cell) for cell in row]
            except ValueError:
                raise ConfigError(f"{path}:{number}: non-numeric cell in {row}") from None
            points.append(ParamPoint(tau=values[0], xi=values[1:]))
    return points


def sample_points(n: int, dim: int, t_max: float, seed: int, x_scale: float = 2.0) -> list[ParamPoint]:
    """Deterministic base points: tau uniform on [0, t_max / 4], xi Gaussian."""
    rng = np.random.default_rng(seed)
    return [
        ParamPoint(tau=float(rng.uniform(0.0, 0.25 * t_max)), xi=rng.normal(scale=x_scale, size=dim))
        for _ in range(n)
    ]
