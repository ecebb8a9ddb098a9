"""Report files: report.json, curves.csv and run.meta.

Floats are written with 17 significant digits so every value reloads
bit-for-bit; non-finite values become the strings ``"inf"``, ``"-inf"``
and ``"nan"``.  Keys keep insertion order, which the result types fix, so
a given result always serializes to the same bytes.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Optional

from .audit import AuditVerdict, BatchVerdict, Hypothesis
from .errors import FilterAuditError
from .montecarlo import CurvePoint
from .regcost import RegCostReport

try:
    from importlib.metadata import PackageNotFoundError, version as _dist_version

    VERSION = _dist_version("artifact")
except (ImportError, PackageNotFoundError):  # running from a source tree
    VERSION = "0.1.0"

EXIT_PASS = 0
EXIT_ERROR = 1
EXIT_FAIL = 2

CURVE_COLUMNS = ("series", "abscissa", "estimate", "half_width", "trials", "stderr")


class ReportWriteError(FilterAuditError, OSError):
    """Writing a report file failed; the message carries the path."""


def format_float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return format(x + 0.0, ".17g")  # folds -0.0 into 0


def _json_str(s: str) -> str:
    return json.dumps(s, ensure_ascii=False)


def to_json(obj, indent: int = 2, _level: int = 0) -> str:
    """Deterministic JSON text with 17-digit floats."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(int(obj))
    if isinstance(obj, float):
        return format_float(obj)
    if isinstance(obj, str):
        return _json_str(obj)
    if hasattr(obj, "item") and callable(obj.item):  # numpy scalar
        return to_json(obj.item(), indent, _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        body = ",\n".join(f"{pad}{_json_str(str(k))}: {to_json(v, indent, _level + 1)}" for k, v in obj.items())
        return "{\n" + body + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str, bool)) or v is None for v in obj):
            return "[" + ", ".join(to_json(v, indent, _level + 1) for v in obj) + "]"
        body = ",\n".join(pad + to_json(v, indent, _level + 1) for v in obj)
        return "[\n" + body + "\n" + end + "]"
    if hasattr(obj, "tolist"):
        return to_json(obj.tolist(), indent, _level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v).strip('"')
    if hasattr(v, "item") and callable(v.item):
        return _csv_cell(v.item())
    text = str(v)
    if any(c in text for c in ',"\n'):
        return '"' + text.replace('"', '""') + '"'
    return text


def to_csv(columns, rows) -> str:
    lines = [",".join(columns)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    return "\n".join(lines) + "\n"


@dataclass
class Report:
    """A result ready for writing: payload, optional curve rows, exit status."""

    kind: str
    payload: dict
    exit_status: int = EXIT_PASS
    curves: Optional[list] = None  # CurvePoint list, or (columns, rows)
    extra_csv: dict = field(default_factory=dict)  # file name -> (columns, rows)


def curve_rows(points) -> list:
    return [[p.series, p.abscissa, p.estimate, p.half_width, p.trials, p.stderr] for p in points]


def as_report(result) -> Report:
    if isinstance(result, Report):
        return result
    if isinstance(result, AuditVerdict):
        status = EXIT_FAIL if result.hypothesis is Hypothesis.H1 else EXIT_PASS
        return Report("audit", {"verdict": result.to_dict()}, status)
    if isinstance(result, BatchVerdict):
        return Report("audit-batch", {"batch": result.to_dict()}, EXIT_PASS if result.passed else EXIT_FAIL)
    if isinstance(result, RegCostReport):
        return Report("cost", {"cost": result.to_dict()}, EXIT_FAIL if result.infeasible else EXIT_PASS)
    if isinstance(result, list) and all(isinstance(p, CurvePoint) for p in result):
        return Report("curves", {"points": [p.to_dict() for p in result]}, EXIT_PASS, curves=result)
    raise TypeError(f"no report layout for {type(result).__name__}")


def _write(path: str, text: str) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise ReportWriteError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_report(result, outdir: str, config_text: str = "", seed: int = 0, command: str = "") -> tuple:
    """Write the report files into ``outdir``; return ``(paths, exit_status)``."""
    report = as_report(result)
    if not os.path.isdir(outdir):
        raise ReportWriteError(f"cannot write {outdir}: output directory does not exist")
    doc = {"kind": report.kind, "exit_status": report.exit_status}
    doc.update(report.payload)
    paths = []
    path = os.path.join(outdir, "report.json")
    _write(path, to_json(doc) + "\n")
    paths.append(path)
    if report.curves is not None:
        if isinstance(report.curves, tuple):
            columns, rows = report.curves
        else:
            columns, rows = CURVE_COLUMNS, curve_rows(report.curves)
        path = os.path.join(outdir, "curves.csv")
        _write(path, to_csv(columns, rows))
        paths.append(path)
    for name, (columns, rows) in sorted(report.extra_csv.items()):
        path = os.path.join(outdir, name)
        _write(path, to_csv(columns, rows))
        paths.append(path)
    meta = {"artifact_version": VERSION, "command": command, "master_seed": seed, "config": config_text}
    path = os.path.join(outdir, "run.meta")
    _write(path, to_json(meta) + "\n")
    paths.append(path)
    return tuple(paths), report.exit_status
