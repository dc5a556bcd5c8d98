"""Run reports: one JSON document per run plus optional flat CSV tables."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__

__all__ = ["Record", "RunReport", "jsonable", "default_report_dir", "REPORT_DIR_ENV"]

REPORT_DIR_ENV = "CUSPBOUNDS_REPORT_DIR"


def default_report_dir() -> Path:
    return Path(os.environ.get(REPORT_DIR_ENV, "cuspbounds-reports"))


def jsonable(obj):
    """Plain JSON types; nan becomes null and infinities become the strings 'inf' / '-inf'."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (frozenset, set)):
        return sorted(jsonable(v) for v in obj)
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


@dataclass
class Record:
    name: str
    test: str
    anchor: str
    values: dict
    passed: bool
    tables: dict = field(default_factory=dict)
    error: str | None = None

    def to_dict(self) -> dict:
        out = {"name": self.name, "test": self.test, "anchor": self.anchor, "verdict": "PASS" if self.passed else "FAIL",
               "values": jsonable(self.values)}
        if self.error:
            out["error"] = self.error
        if self.tables:
            out["tables"] = {k: jsonable(v) for k, v in self.tables.items()}
        return out


@dataclass
class RunReport:
    subcommand: str
    config: dict
    records: list[Record] = field(default_factory=list)
    wall_clock: float = 0.0

    @property
    def passed(self) -> bool:
        return bool(self.records) and all(r.passed for r in self.records)

    def payload(self) -> dict:
        """Everything except the wall-clock time; identical for identical config and seed."""
        return {"tool": "cuspbounds", "version": __version__, "subcommand": self.subcommand,
                "config": jsonable(self.config), "records": [r.to_dict() for r in self.records],
                "summary": "PASS" if self.passed else "FAIL"}

    def to_dict(self) -> dict:
        d = self.payload()
        d["wall_clock_seconds"] = round(self.wall_clock, 3)
        return d

    def write(self, path: Path, csv_tables: bool = True) -> list[Path]:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, allow_nan=False) + "\n")
        written = [path]
        if csv_tables:
            for rec in self.records:
                for tname, rows in rec.tables.items():
                    if not rows:
                        continue
                    p = path.with_name(f"{path.stem}.{rec.name}.{tname}.csv")
                    _write_csv(p, rows)
                    written.append(p)
        return written


def _write_csv(path: Path, rows: list[dict]) -> None:
    keys: list[str] = []
    for row in rows:
        for k in row:
            if k not in keys:
                keys.append(k)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=keys)
        w.writeheader()
        for row in rows:
            w.writerow({k: json.dumps(jsonable(v)) if isinstance(v, (list, tuple, dict, np.ndarray)) else jsonable(v)
                        for k, v in row.items()})
