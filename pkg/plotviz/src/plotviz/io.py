"""CSV ingestion for the documented run-output schemas."""

import csv
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    pass


def read_csv(path):
    """Read a headered CSV into {column: array} (numeric where possible)."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty CSV")
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path.name}: empty CSV")
    columns = {}
    for j, name in enumerate(header):
        values = [row[j] for row in rows]
        try:
            columns[name] = np.array([float(v) for v in values])
        except ValueError:
            columns[name] = np.array(values)
    return columns


def require_columns(columns, names, path):
    missing = [n for n in names if n not in columns]
    if missing:
        raise SchemaError(f"{Path(path).name}: missing column {missing[0]!r}")
    return columns


def mu_columns(columns):
    """The parameter columns mu1..mud, in order."""
    names = []
    i = 1
    while f"mu{i}" in columns:
        names.append(f"mu{i}")
        i += 1
    return names
