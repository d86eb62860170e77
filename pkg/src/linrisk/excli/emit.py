"""CSV and JSON serialization of result tables."""

import csv
import io
import json
import math

import numpy as np


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def to_csv(table):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue().encode("utf-8")


def _json_value(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return None if not math.isfinite(float(x)) else float(x)
    return x


def to_json(table):
    cols = {c: [_json_value(r[k]) for r in table.rows] for k, c in enumerate(table.columns)}
    doc = {"schema_version": table.schema_version, "column_order": list(table.columns), "columns": cols,
           "metadata": table.metadata}
    return (json.dumps(doc, indent=2, sort_keys=False) + "\n").encode("utf-8")


def emit(table, fmt="csv"):
    if fmt == "csv":
        return to_csv(table)
    if fmt == "json":
        return to_json(table)
    raise ValueError(f"unknown format {fmt!r}")


def parse_csv(data):
    """Header and rows of an emitted CSV, numeric cells converted back to numbers."""
    reader = csv.reader(io.StringIO(data.decode("utf-8") if isinstance(data, bytes) else data))
    rows = list(reader)
    if not rows:
        return [], []

    def conv(s):
        if s in ("true", "false"):
            return s == "true"
        try:
            return int(s)
        except ValueError:
            pass
        try:
            return float(s)
        except ValueError:
            return s

    return rows[0], [tuple(conv(c) for c in r) for r in rows[1:]]
