"""CSV and JSON sidecar writers."""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .config import np_default
from .experiments import FigureData


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_figure(fd: FigureData, out_dir: str | Path) -> tuple[Path, Path]:
    """Write ``<name>.csv`` and ``<name>.json`` into ``out_dir``; return both paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{fd.name}.csv"
    meta_path = out / f"{fd.name}.json"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fd.columns)
        for row in fd.rows:
            w.writerow([_cell(v) for v in row])
    meta = fd.metadata()
    meta["csv"] = csv_path.name
    meta_path.write_text(json.dumps(meta, indent=2, sort_keys=True, default=np_default) + "\n", encoding="utf-8")
    return csv_path, meta_path


def read_rows(csv_path: str | Path) -> tuple[list[str], list[list[str]]]:
    with open(csv_path, newline="", encoding="utf-8") as fh:
        r = list(csv.reader(fh))
    return r[0], r[1:]
