"""Compare two run directories file by file."""
from __future__ import annotations

import csv
import io
from pathlib import Path

# wall-clock time per epoch is the one recorded value that cannot repeat
VOLATILE_COLUMNS = {"_trainlog.csv": "seconds"}


def _without_column(data: bytes, column: str) -> list[list[str]]:
    rows = list(csv.reader(io.StringIO(data.decode())))
    drop = rows[0].index(column)
    return [r[:drop] + r[drop + 1:] for r in rows]


def differences(a: Path, b: Path) -> list[str]:
    """Relative paths whose content differs or that exist on one side only."""
    files_a = {p.relative_to(a).as_posix() for p in a.rglob("*") if p.is_file()}
    files_b = {p.relative_to(b).as_posix() for p in b.rglob("*") if p.is_file()}
    out = sorted(files_a ^ files_b)
    for rel in sorted(files_a & files_b):
        da, db = (a / rel).read_bytes(), (b / rel).read_bytes()
        if da == db:
            continue
        column = next((c for suffix, c in VOLATILE_COLUMNS.items() if rel.endswith(suffix)), None)
        if column is None or _without_column(da, column) != _without_column(db, column):
            out.append(rel)
    return out
