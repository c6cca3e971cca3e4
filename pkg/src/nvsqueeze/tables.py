"""Tabular results and their CSV serialization.

File layout: ``#``-prefixed preamble lines (each ``# key = <json>``),
one header row, then data rows. Floats use 17 significant digits, line
endings are LF and the encoding is UTF-8.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

FACTOR_ORDER_TAG = "spin(x)phonon"


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    diagnostics: list = field(default_factory=list)

    def append(self, row: dict, diagnostics: dict | None = None):
        missing = set(self.columns) - set(row)
        if missing:
            raise KeyError(f"row lacks columns {sorted(missing)}")
        self.rows.append(tuple(row[c] for c in self.columns))
        self.diagnostics.append(diagnostics or {})

    def column(self, name) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows])

    def records(self) -> list[dict]:
        return [dict(zip(self.columns, r)) for r in self.rows]

    def where(self, **conditions) -> list[dict]:
        return [r for r in self.records() if all(r[k] == v for k, v in conditions.items())]

    def __len__(self):
        return len(self.rows)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    return str(value)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        return value if math.isfinite(value) else str(value)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def render_table(table: ResultTable) -> str:
    meta = dict(table.metadata)
    meta.setdefault("version", __version__)
    meta.setdefault("factor_order", FACTOR_ORDER_TAG)
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key} = {json.dumps(_jsonable(meta[key]), sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def write_table(table: ResultTable, path, plot: bool = False, x=None, y=None, group=None) -> Path:
    """Write ``table`` as CSV; optionally a companion SVG line plot."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(render_table(table))
    except OSError as exc:
        raise OSError(f"cannot write table to {path}: {exc}") from exc
    if plot and len(table) and x and y:
        plot_table(table, path.with_suffix(".svg"), x, y, group)
    return path


def read_preamble(path) -> dict:
    meta = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            key, _, value = line[1:].partition("=")
            meta[key.strip()] = json.loads(value)
    return meta


def read_table(path) -> ResultTable:
    meta = read_preamble(path)
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.reader(lines)
    columns = next(reader)
    rows = []
    for raw in reader:
        row = []
        for v in raw:
            if v in ("true", "false"):
                row.append(v == "true")
                continue
            try:
                row.append(int(v))
            except ValueError:
                try:
                    row.append(float(v))
                except ValueError:
                    row.append(v)
        rows.append(tuple(row))
    return ResultTable(columns=columns, rows=rows, metadata=meta)


def plot_table(table: ResultTable, path, x, y, group=None):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "nvsqueeze"
    fig, ax = plt.subplots(figsize=(5, 3.5))
    records = table.records()
    keys = sorted({r[group] for r in records}) if group else [None]
    for key in keys:
        sel = [r for r in records if group is None or r[group] == key]
        ax.plot([r[x] for r in sel], [r[y] for r in sel], marker="o", ms=3,
                label=None if key is None else f"{group}={key:g}")
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    if group:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path
