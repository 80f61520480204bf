"""Per-iterate trace records, run results and trace file I/O.

A trace file is a CSV with a fixed header row (or a JSON document with the
same fields).  Lines starting with ``#`` before the header carry run
metadata: the configuration and the F-evaluation accounting rule.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from lmip.errors import MalformedTrace

__all__ = [
    "Status",
    "IterateTrace",
    "SolveResult",
    "TRACE_FIELDS",
    "FE_CONVENTION",
    "trace_to_csv",
    "trace_to_json",
    "read_trace",
    "write_trace",
    "report_table",
]

TRACE_FIELDS = (
    "k",
    "normF",
    "f",
    "kind",
    "alpha",
    "backtracks",
    "proj_iters",
    "rank_p",
    "infeas",
    "ms",
)

FE_CONVENTION = "Fe = 1 (initial) + iterations + line-search backtracks"


class Status(enum.Enum):
    CONVERGED = "converged"
    MAX_ITERS = "max_iters"
    LINE_SEARCH_FAIL = "line_search_fail"
    STATIONARY = "stationary"
    BUDGET_EXHAUSTED = "budget_exhausted"
    NON_FINITE = "non_finite"

    @property
    def exit_code(self):
        return _EXIT_CODES[self]


_EXIT_CODES = {
    Status.CONVERGED: 0,
    Status.MAX_ITERS: 2,
    Status.LINE_SEARCH_FAIL: 3,
    Status.STATIONARY: 5,
    Status.BUDGET_EXHAUSTED: 1,
    Status.NON_FINITE: 1,
}


@dataclass
class IterateTrace:
    """One row of a trace.  ``k = 0`` is the starting point."""

    k: int
    normF: float
    f: float
    kind: str
    alpha: float
    backtracks: int
    proj_iters: int
    rank_p: int
    infeas: float
    ms: float

    def as_row(self):
        return [getattr(self, name) for name in TRACE_FIELDS]

    def without_timing(self):
        return tuple(getattr(self, name) for name in TRACE_FIELDS if name != "ms")


@dataclass
class SolveResult:
    """Outcome of a solver run.

    ``diagnostics`` holds per-iteration lists keyed by name (``eps``,
    ``watermark``, ``dir_deriv``, ...), each aligned with ``trace[1:]``.
    """

    x: np.ndarray
    status: Status
    trace: list
    n_fev: int
    elapsed: float
    message: str = ""
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_iter(self):
        return len(self.trace) - 1

    @property
    def normF(self):
        return self.trace[-1].normF

    def summary(self):
        return (
            f"It={self.n_iter} Fe={self.n_fev} Time={self.elapsed:.3f}s "
            f"normF={self.normF:.3e} status={self.status.value}"
        )


# --------------------------------------------------------------------------
# serialisation


def _fmt(value):
    if isinstance(value, float):
        return repr(value)
    return str(value)


def trace_to_csv(trace, meta=None):
    buf = io.StringIO()
    for key, value in (meta or {}).items():
        buf.write(f"# {key}: {value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_FIELDS)
    for rec in trace:
        writer.writerow([_fmt(v) for v in rec.as_row()])
    return buf.getvalue()


def trace_to_json(trace, meta=None):
    doc = {"meta": dict(meta or {}), "fields": list(TRACE_FIELDS)}
    doc["rows"] = [asdict(rec) for rec in trace]
    return json.dumps(doc, indent=1) + "\n"


def write_trace(path, trace, meta=None, fmt=None):
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    text = trace_to_json(trace, meta) if fmt == "json" else trace_to_csv(trace, meta)
    path.write_text(text)
    return path


_CASTS = {f.name: f.type for f in fields(IterateTrace)}


def _record(raw, where):
    try:
        values = {}
        for name in TRACE_FIELDS:
            cast = _CASTS[name]
            value = raw[name]
            if cast == "int":
                values[name] = int(value)
            elif cast == "float":
                values[name] = float(value)
            else:
                values[name] = str(value)
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedTrace(f"{where}: bad row {raw!r} ({exc})") from exc
    if not math.isfinite(values["normF"]):
        raise MalformedTrace(f"{where}: non-finite normF")
    return IterateTrace(**values)


def _check_order(trace, where):
    if not trace:
        raise MalformedTrace(f"{where}: no trace rows")
    ks = [rec.k for rec in trace]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise MalformedTrace(f"{where}: k is not strictly increasing")


def read_trace(path):
    """Read a CSV or JSON trace.  Returns ``(records, meta)``."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedTrace(f"{path}: {exc}") from exc
    if not text.strip():
        raise MalformedTrace(f"{path}: empty file")
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            rows = doc["rows"]
            meta = doc.get("meta", {})
        except (ValueError, KeyError, TypeError) as exc:
            raise MalformedTrace(f"{path}: invalid JSON trace ({exc})") from exc
    else:
        meta = {}
        body = []
        for line in text.splitlines():
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                meta[key.strip()] = value.strip()
            elif line.strip():
                body.append(line)
        reader = csv.DictReader(body)
        if tuple(reader.fieldnames or ()) != TRACE_FIELDS:
            raise MalformedTrace(f"{path}: header is {reader.fieldnames}, expected {list(TRACE_FIELDS)}")
        rows = list(reader)
    trace = [_record(row, path) for row in rows]
    _check_order(trace, path)
    return trace, meta


# --------------------------------------------------------------------------
# reports


def _summary_of(trace, meta):
    backtracks = sum(rec.backtracks for rec in trace)
    return {
        "label": meta.get("label", ""),
        "It": len(trace) - 1,
        "Fe": 1 + (len(trace) - 1) + backtracks,
        "Time_s": trace[-1].ms / 1000.0,
        "normF": trace[-1].normF,
        "status": meta.get("status", ""),
    }


def report_table(traces, labels=None):
    """Side-by-side ``||F(x_k)||`` table plus per-run summaries.

    ``traces`` is a list of ``(records, meta)`` pairs as returned by
    :func:`read_trace`.  Returns ``(text, summaries)``.
    """
    if not traces:
        raise MalformedTrace("no traces to report")
    labels = list(labels or [])
    for i, (_, meta) in enumerate(traces):
        if i >= len(labels):
            labels.append(meta.get("label") or f"run{i + 1}")
    summaries = []
    for (trace, meta), label in zip(traces, labels):
        s = _summary_of(trace, meta)
        s["label"] = label
        summaries.append(s)

    width = max(12, *(len(lb) for lb in labels))
    depth = max(len(trace) for trace, _ in traces)
    head = "k".rjust(6) + "".join(lb.rjust(width + 2) for lb in labels)
    lines = [head, "-" * len(head)]
    for k in range(depth):
        cells = []
        for trace, _ in traces:
            cells.append(f"{trace[k].normF:.2e}" if k < len(trace) else "")
        lines.append(str(k).rjust(6) + "".join(c.rjust(width + 2) for c in cells))
    lines.append("-" * len(head))
    for key, fmt in (("It", "{}"), ("Fe", "{}"), ("Time_s", "{:.3f}"), ("status", "{}")):
        cells = [fmt.format(s[key]) for s in summaries]
        lines.append(key.rjust(6) + "".join(c.rjust(width + 2) for c in cells))
    return "\n".join(lines) + "\n", summaries
