from __future__ import annotations

import csv
from pathlib import Path

from ..tensorcore import ContractError


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return format(value, ".12g")
    if hasattr(value, "item"):  # numpy scalar
        return _fmt(value.item())
    return str(value)


def write_metrics(rows, schema, path: str | Path) -> Path:
    """Write ``rows`` (dicts) with header ``schema``; reals get 12 significant digits."""
    schema = list(schema)
    for i, row in enumerate(rows):
        missing = [c for c in schema if c not in row]
        extra = [c for c in row if c not in schema]
        if missing:
            raise ContractError(f"row {i} lacks column {missing[0]!r}")
        if extra:
            raise ContractError(f"row {i} has column {extra[0]!r} not in schema")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(schema)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in schema])
    return path


def read_metrics(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
