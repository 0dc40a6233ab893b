"""CSV and JSON writers that embed the run configuration.

CSV output opens with `# urncut <version>` and `# config <json>` comment
lines; JSON results written to a file get a `<out>.meta.json` sidecar with
the same block. CSV floats use 17 significant digits and JSON floats their
shortest repr; both round-trip every binary64 value.
"""

import csv
import json
import math
import sys
from contextlib import contextmanager

import numpy as np

from urncut import __version__
from urncut.utils import format_float

FORMATS = ("csv", "json")


def format_value(value):
    """CSV cell text: None is empty, floats use 17 digits, non-finite floats stay readable."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format_float(value)
    return str(value)


def sanitize(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats become null."""
    if isinstance(value, dict):
        return {str(k): sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [sanitize(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def metadata(config):
    return {"urncut": __version__, "config": sanitize(config)}


@contextmanager
def open_output(path):
    """Yield a text handle on `path`, or on stdout when `path` is None."""
    if path is None:
        yield sys.stdout
        return
    with open(path, "w", newline="") as f:
        yield f


def write_preamble(fh, config):
    fh.write(f"# urncut {__version__}\n")
    fh.write(f"# config {json.dumps(sanitize(config), sort_keys=True)}\n")


def write_csv(fh, header, rows, config):
    write_preamble(fh, config)
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])


def write_json(fh, records):
    json.dump(sanitize(records), fh, indent=2)
    fh.write("\n")


def write_meta(path, config):
    meta_path = f"{path}.meta.json"
    with open(meta_path, "w") as f:
        json.dump(metadata(config), f, indent=2, sort_keys=True)
        f.write("\n")
    return meta_path


def export_table(path, fmt, header, rows, config):
    """Write rows as CSV, or as a JSON array of header-keyed objects, to `path` or stdout."""
    if fmt not in FORMATS:
        raise ValueError(f"Unsupported format {fmt!r}. Use 'json' or 'csv'")
    rows = list(rows)
    with open_output(path) as fh:
        if fmt == "csv":
            write_csv(fh, header, rows, config)
        else:
            write_json(fh, [dict(zip(header, row)) for row in rows])
    if fmt == "json" and path is not None:
        write_meta(path, config)


def export_records(path, records, config):
    """Write a JSON array of records to `path` (with sidecar) or stdout."""
    with open_output(path) as fh:
        write_json(fh, records)
    if path is not None:
        write_meta(path, config)


def read_csv(path):
    """(comment lines, header, rows) of a file written by `write_csv`."""
    with open(path, newline="") as f:
        lines = f.read().splitlines()
    comments = [line for line in lines if line.startswith("#")]
    reader = csv.reader(line for line in lines if not line.startswith("#"))
    header = next(reader)
    return comments, header, list(reader)
