"""Result files: CSV (primary), JSON mirror, gnuplot data and the run manifest.

Every file is written to a temporary sibling and moved into place, so a
reader never sees a half-written result. Floats are written with ``repr``,
which round-trips exactly and keeps output byte-stable.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from splitrx.montecarlo import GainReport, SweepRow

__all__ = [
    "CSV_SCHEMA",
    "SER_COLUMNS",
    "GAIN_COLUMNS",
    "COMPLEXITY_COLUMNS",
    "RunManifest",
    "atomic_write",
    "ser_table",
    "gain_table",
    "complexity_table",
    "render_csv",
    "render_json",
    "render_dat",
    "read_csv",
]

CSV_SCHEMA = "# splitrx-csv v1"
SER_COLUMNS = ("power", "rho", "detector", "ser", "ci_half_width", "trials", "seed")
GAIN_COLUMNS = ("power", "ser_cd", "ser_pd", "ser_split_best", "best_rho", "gain", "trials",
                "seed", "note")
COMPLEXITY_COLUMNS = ("constellation", "upsilon_multiplications", "reference_multiplications",
                      "ratio", "per_symbol_upsilon", "per_symbol_reference")


@dataclass
class RunManifest:
    config_hash: str
    master_seed: int
    tool_version: str
    preset_assumptions: list[str] = field(default_factory=list)
    timing: dict[str, float] = field(default_factory=dict)
    config: str = ""
    outputs: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(self.__dict__, indent=2) + "\n"


def atomic_write(path: Path, text: str) -> None:
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


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def ser_table(rows: Sequence[SweepRow]) -> list[dict]:
    return [
        {
            "power": r.power,
            "rho": r.rho,
            "detector": r.detector,
            "ser": r.estimate.ser,
            "ci_half_width": r.estimate.ci_half_width,
            "trials": r.estimate.trials,
            "seed": r.estimate.seed,
        }
        for r in rows
    ]


def gain_table(reports: Sequence[GainReport], seed: int) -> list[dict]:
    return [
        {
            "power": g.power,
            "ser_cd": g.ser_cd,
            "ser_pd": g.ser_pd,
            "ser_split_best": g.ser_split_best,
            "best_rho": g.best_rho,
            "gain": g.gain,
            "trials": g.trials,
            "seed": seed,
            "note": g.note,
        }
        for g in reports
    ]


def complexity_table(report: dict) -> list[dict]:
    return [{k: report[k] for k in COMPLEXITY_COLUMNS}]


def render_csv(table: list[dict], columns: Sequence[str], kind: str) -> str:
    buf = io.StringIO()
    buf.write(f"{CSV_SCHEMA} {kind}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in table:
        writer.writerow([_cell(row[c]) for c in columns])
    return buf.getvalue()


def render_json(table: list[dict], kind: str) -> str:
    return json.dumps({"schema": f"{CSV_SCHEMA[2:]} {kind}", "rows": table}, indent=2) + "\n"


def render_dat(table: list[dict], x: str, y: str, group: Sequence[str]) -> str:
    """gnuplot data: one indexed block per group, separated by two blank lines."""
    blocks: dict[tuple, list[dict]] = {}
    for row in table:
        blocks.setdefault(tuple(row[g] for g in group), []).append(row)
    out = []
    for key, rows in blocks.items():
        label = " ".join(f"{g}={_cell(k)}" for g, k in zip(group, key))
        lines = [f"# {label}", f"# {x} {y}"]
        lines += [f"{_cell(r[x])} {_cell(r[y]) or 'nan'}" for r in rows]
        out.append("\n".join(lines))
    return "\n\n\n".join(out) + "\n"


def read_csv(path: str | Path) -> list[dict]:
    """Rows of a result CSV as string dicts, skipping the schema line."""
    with open(path, newline="") as fh:
        first = fh.readline()
        if not first.startswith(CSV_SCHEMA):
            raise ValueError(f"{path}: missing schema line {CSV_SCHEMA!r}")
        return list(csv.DictReader(fh))
