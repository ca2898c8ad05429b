"""CSV tables with a leading ``#`` comment line.

Layout: one comment line describing the columns, the column header row,
then data rows. Floats are written with 17 significant digits so that a
value read back is bit-identical to the one written.
"""

from __future__ import annotations

import csv
import io
import numbers
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    """A CSV file does not follow the expected layout."""


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, numbers.Integral):
        return str(int(value))
    if isinstance(value, numbers.Real):
        return f"{float(value):.17g}"
    return str(value)


def render_table(comment, header, rows):
    """The table as a string (``\\n`` line endings)."""
    if "\n" in comment:
        raise ValueError("comment must be a single line")
    buf = io.StringIO()
    buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def write_table(path, comment, header, rows):
    text = render_table(comment, header, rows)
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return text


def read_table(path):
    """Return ``(comment, header, rows)`` with every field as a string."""
    lines = Path(path).read_text().splitlines()
    if not lines or not lines[0].startswith("#"):
        raise SchemaError(f"{path}: first line must be a '#' comment")
    if len(lines) < 2:
        raise SchemaError(f"{path}: missing column header row")
    reader = csv.reader(lines[1:])
    header = next(reader)
    rows = [row for row in reader if row]
    for i, row in enumerate(rows, start=3):
        if len(row) != len(header):
            raise SchemaError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
    return lines[0][1:].strip(), header, rows
