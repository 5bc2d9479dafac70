"""Deterministic CSV emission for experiment tables."""

from __future__ import annotations

import csv

from .errors import ContractError


def format_cell(v) -> str:
    """Stable text for one cell; floats use shortest round-trip repr."""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def emit_csv(path, rows: list[dict], columns: list[str] | None = None):
    """Write dict rows with a header; column order is fixed and explicit.

    columns=None takes the first row's key order; an empty table then needs
    explicit columns to know its header.
    """
    if columns is None:
        if not rows:
            raise ContractError("empty table needs explicit columns")
        columns = list(rows[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            missing = [c for c in columns if c not in row]
            if missing:
                raise ContractError(f"row missing columns {missing}")
            writer.writerow([format_cell(row[c]) for c in columns])


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    """Read back (header, raw string rows); values stay text."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ContractError(f"{path} is empty")
        return header, [row for row in reader]
