"""Reader for the simulator's CSV outputs.

The files carry '#'-prefixed provenance comment lines before an
RFC-4180-style table; this module is the only coupling to the producer
and it is purely through that public file contract.
"""

from __future__ import annotations

import csv
import io


class CsvFormatError(Exception):
    pass


def read_rows(path: str) -> list[dict[str, str]]:
    with open(path, encoding="utf-8") as fh:
        table = "".join(line for line in fh if not line.startswith("#"))
    reader = csv.DictReader(io.StringIO(table))
    rows = [dict(r) for r in reader]
    if not rows:
        raise CsvFormatError(f"{path}: no data rows")
    return rows


def require_columns(rows: list[dict[str, str]], columns) -> None:
    have = rows[0].keys()
    missing = [c for c in columns if c not in have]
    if missing:
        raise CsvFormatError(f"missing column(s): {', '.join(missing)}")


def to_float(value: str) -> float:
    return float(value)


def to_bool(value: str) -> bool:
    return value.strip().lower() == "true"
