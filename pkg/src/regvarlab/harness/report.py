"""Sweep reports and their CSV / JSON-sidecar serialization."""
import csv
from dataclasses import dataclass, field
import json
import math
import os

from .. import __version__

HEADER = ("experiment", "sigma", "beta", "R", "quantity", "value", "bound", "pass")


@dataclass(frozen=True)
class Row:
    experiment: str
    sigma: float
    beta: float
    R: float
    quantity: str
    value: object
    bound: object
    passed: bool


@dataclass
class SweepReport:
    experiment: str
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def add(self, *args, **kw):
        self.rows.append(Row(*args, **kw))

    def extend(self, rows):
        self.rows.extend(rows)

    @property
    def passed(self):
        return all(r.passed for r in self.rows)

    def failures(self):
        return [r for r in self.rows if not r.passed]

    def find(self, quantity, **match):
        out = []
        for r in self.rows:
            if r.quantity != quantity:
                continue
            if all(getattr(r, k) == v for k, v in match.items()):
                out.append(r)
        return out


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "item"):
        return _jsonable(obj.item())
    return obj


def emit(report, path, config=None):
    """Write the CSV and a `<path>.meta.json` sidecar; both are deterministic."""
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for r in report.rows:
            w.writerow([r.experiment, _fmt(r.sigma), _fmt(r.beta), _fmt(r.R), r.quantity,
                        _fmt(r.value), _fmt(r.bound), _fmt(bool(r.passed))])
    meta = {"tool": "regvarlab", "version": __version__, "experiment": report.experiment,
            "rows": len(report.rows), "passed": report.passed,
            "summary": _jsonable(report.summary),
            "config": _jsonable(config.echo()) if config is not None else None}
    with open(path + ".meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
