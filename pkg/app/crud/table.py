# app/crud/table.py
import csv
import io
from pathlib import Path
from typing import Iterable, Sequence

from app.crud.base import PathLike, atomic_write


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


class TableRepository:
    """CSV tables (loss curves, benchmark results) with a fixed column order"""

    def save(self, path: PathLike, columns: Sequence[str], rows: Iterable[dict]) -> Path:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c)) for c in columns])
        return atomic_write(path, buffer.getvalue().encode("utf-8"))

    def load(self, path: PathLike) -> list[dict[str, str]]:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
