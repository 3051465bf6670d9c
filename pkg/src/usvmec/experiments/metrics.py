"""Append-only CSV metrics files.

Columns (fixed order, header mandatory)::

    variant,n_usvs,n_uavs,n_gss,seed,iteration,mean_episode_reward,mean_task_delay,wall_clock_seconds

Floats are written with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
import math
import threading
from pathlib import Path

from ..trainer import METRIC_FIELDS, MetricsRow

_INT_FIELDS = {"n_usvs", "n_uavs", "n_gss", "seed", "iteration"}
_FLOAT_FIELDS = {"mean_episode_reward", "mean_task_delay", "wall_clock_seconds"}


def _format(value) -> str:
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite metric value {value}")
        return repr(value)
    return str(value)


class MetricsWriter:
    """Serialized appender; safe to share between threads."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists() and self.path.stat().st_size > 0:
            with open(self.path, newline="") as fh:
                header = next(csv.reader(fh), None)
            if tuple(header or ()) != METRIC_FIELDS:
                raise ValueError(f"{self.path}: unexpected header {header}")
        else:
            with open(self.path, "w", newline="") as fh:
                fh.write(",".join(METRIC_FIELDS) + "\n")

    def append(self, row: MetricsRow) -> None:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([_format(v) for v in row.as_tuple()])
        with self._lock, open(self.path, "a", newline="") as fh:
            fh.write(buf.getvalue())
            fh.flush()


def read_metrics(path: str | Path) -> list[MetricsRow]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != METRIC_FIELDS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for rec in reader:
            kwargs = {}
            for k, v in rec.items():
                kwargs[k] = int(v) if k in _INT_FIELDS else float(v) if k in _FLOAT_FIELDS else v
            rows.append(MetricsRow(**kwargs))
    return rows
