"""CSV / JSON serialization of sweep results."""

import csv
import io
import json
import math
from dataclasses import astuple
from pathlib import Path

from .engine import SweepPoint, SweepResult

__all__ = ["CSV_COLUMNS", "emit_results", "load_results", "format_csv"]

CSV_COLUMNS = ("snr_db", "scheme", "tier", "tau_fraction", "beta", "K",
               "mean_rate_bps", "stderr_bps", "trials", "resamples", "seed")
_FLOAT_COLS = {"snr_db", "tau_fraction", "beta", "mean_rate_bps", "stderr_bps"}
_INT_COLS = {"K", "trials", "resamples", "seed"}


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def format_csv(result):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for p in result.points:
        writer.writerow([_fmt(v) for v in astuple(p)])
    return buf.getvalue()


def _json_value(value):
    # JSON has no NaN; keep the 17-digit text form for floats
    if isinstance(value, float):
        return format(value, ".17g") if not math.isfinite(value) else value
    return value


def format_json(result):
    doc = {
        "provenance": result.provenance,
        "config": result.config,
        "columns": list(CSV_COLUMNS),
        "records": [{c: _json_value(getattr(p, c)) for c in CSV_COLUMNS}
                    for p in result.points],
    }
    # repr of a Python float is the shortest round-tripping form
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def emit_results(result, format="csv", path=None):
    """Write ``result`` as CSV or JSON; ``path=None`` or ``"-"`` returns the text."""
    if format == "csv":
        text = format_csv(result)
    elif format == "json":
        text = format_json(result)
    else:
        raise ValueError(f"unknown format {format!r}")
    if path is None or str(path) == "-":
        return text
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write results to {path}: {exc.strerror}") from None
    return text


def _parse_field(name, text):
    if name in _FLOAT_COLS:
        return None if text in ("", None) else float(text)
    if name in _INT_COLS:
        return int(text)
    return text


def _parse_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if tuple(header or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected CSV header {header}")
    points = [SweepPoint(*[_parse_field(c, v) for c, v in zip(CSV_COLUMNS, row)])
              for row in reader]
    return SweepResult(points, {})


def _parse_json(text):
    doc = json.loads(text)
    points = []
    for rec in doc["records"]:
        vals = []
        for c in CSV_COLUMNS:
            v = rec[c]
            if c in _FLOAT_COLS and isinstance(v, (str, int)) and not isinstance(v, bool):
                v = float(v)
            vals.append(v)
        points.append(SweepPoint(*vals))
    return SweepResult(points, doc.get("provenance", {}), doc.get("config"))


def load_results(path_or_text, format=None):
    """Inverse of :func:`emit_results`, from a path or the text itself."""
    text = path_or_text
    if isinstance(path_or_text, Path) or (
            isinstance(path_or_text, str) and "\n" not in path_or_text):
        path = Path(path_or_text)
        text = path.read_text()
        if format is None:
            format = "json" if path.suffix == ".json" else "csv"
    if format is None:
        format = "json" if text.lstrip().startswith("{") else "csv"
    return _parse_json(text) if format == "json" else _parse_csv(text)
