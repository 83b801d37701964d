"""Report bundles: judged metrics, emitted artifacts and provenance, written as
a key-sorted JSON summary with 17-significant-digit numbers."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Metric", "ReportBundle", "write_report", "dumps", "atomic_write", "write_csv", "SUMMARY_NAME"]

SUMMARY_NAME = "summary.json"


@dataclass(frozen=True)
class Metric:
    """A measured value and the rule it was judged by.

    ``comparison`` is one of ``<``, ``<=``, ``>=``, ``>``, ``within`` (|value -
    target| <= tolerance), ``between`` (lo <= value <= hi, tolerance = (lo, hi))
    or ``true`` (value is a boolean that must hold).
    """

    value: object
    comparison: str
    tolerance: object = None
    target: object = None

    @property
    def passed(self) -> bool:
        v, tol = self.value, self.tolerance
        if self.comparison == "true":
            return bool(v)
        if isinstance(v, float) and math.isnan(v):
            return False
        if self.comparison == "<":
            return v < tol
        if self.comparison == "<=":
            return v <= tol
        if self.comparison == ">":
            return v > tol
        if self.comparison == ">=":
            return v >= tol
        if self.comparison == "within":
            return abs(v - self.target) <= tol
        if self.comparison == "between":
            return tol[0] <= v <= tol[1]
        raise ValueError(f"unknown comparison {self.comparison!r}")

    def as_dict(self) -> dict:
        out = {"value": self.value, "comparison": self.comparison, "tolerance": self.tolerance,
               "pass": self.passed}
        if self.target is not None:
            out["target"] = self.target
        return out


@dataclass
class ReportBundle:
    subcommand: str
    metrics: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)
    artifacts: list = field(default_factory=list)
    provenance: dict = field(default_factory=dict)
    error: str | None = None

    @property
    def passed(self) -> bool:
        return self.error is None and all(m.passed for m in self.metrics.values())

    @property
    def status(self) -> str:
        if self.error is not None:
            return "FAILED"
        return "PASS" if self.passed else "FAIL"

    def summary(self) -> dict:
        out = {
            "subcommand": self.subcommand,
            "status": self.status,
            "metrics": {k: m.as_dict() for k, m in self.metrics.items()},
            "diagnostics": dict(self.diagnostics),
            "artifacts": sorted(self.artifacts),
            "provenance": dict(self.provenance),
        }
        if self.error is not None:
            out["error"] = self.error
        return out


def _number(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    text = f"{x:.17g}"
    # keep a float marker so the value parses back as a float
    return text if any(c in text for c in ".eEn") else text + ".0"


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return _number(obj)
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if hasattr(obj, "item") and not isinstance(obj, (list, tuple, dict)):
        return _encode(obj.item(), indent, level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_encode(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """JSON with sorted keys and floats rendered to 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def atomic_write(path, text: str) -> Path:
    """Write via a temporary file in the same directory, then rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def write_csv(path, header, rows) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_number(float(v)) if isinstance(v, float) or hasattr(v, "dtype") and v.dtype.kind == "f"
                    else v for v in row])
    return atomic_write(path, buf.getvalue())


def write_report(bundle: ReportBundle, out_dir) -> list[Path]:
    """Write ``summary.json`` into ``out_dir``; returns the summary path and the listed artifacts."""
    out = Path(out_dir)
    summary = atomic_write(out / SUMMARY_NAME, dumps(bundle.summary()))
    return [summary, *(out / a for a in sorted(bundle.artifacts))]
