"""Run traces: per-iteration records, CSV serialization and validation.

Trace file layout::

    # natmo-trace run_id=... problem=... method=... seed=... stop_threshold=...
    iter,time_ms,train_loss,stop_metric,test_metric,alpha,beta,grad_norm
    0,...
    ...
    # status=converged

Reals are serialized with 17 significant digits so parsing a serialized
trace reproduces it exactly.  The columns alpha/beta/grad_norm describe the
step leaving each iterate; the terminal row (no step taken) carries zeros.
In-flight traces are streamed to ``<name>.csv.partial`` and renamed on
completion, so every ``*.csv`` file is a complete, valid trace even after
an interruption.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import List

__all__ = ["IterRecord", "RunTrace", "TraceWriter", "TraceFormatError",
           "serialize_trace", "parse_trace", "read_trace", "write_trace",
           "STATUSES", "HEADER"]

HEADER = "iter,time_ms,train_loss,stop_metric,test_metric,alpha,beta,grad_norm"
STATUSES = ("converged", "max_iters", "diverged")


class TraceFormatError(ValueError):
    pass


def _feq(a: float, b: float) -> bool:
    return a == b or (a != a and b != b)  # NaN-tolerant


@dataclass(frozen=True, eq=False)
class IterRecord:
    iter: int
    time_ms: float
    train_loss: float
    stop_metric: float
    test_metric: float
    alpha: float
    beta: float
    grad_norm: float

    def __eq__(self, other):
        if not isinstance(other, IterRecord):
            return NotImplemented
        return self.iter == other.iter and all(
            _feq(getattr(self, f), getattr(other, f))
            for f in ("time_ms", "train_loss", "stop_metric", "test_metric",
                      "alpha", "beta", "grad_norm")
        )


@dataclass
class RunTrace:
    run_id: str
    problem: str
    method: str
    seed: int
    stop_threshold: float
    records: List[IterRecord] = field(default_factory=list)
    status: str = ""

    def validate(self):
        if self.status not in STATUSES:
            raise TraceFormatError(f"bad status {self.status!r}")
        if not self.records:
            raise TraceFormatError("trace has no records")
        prev_it, prev_t = -1, -1.0
        for rec in self.records:
            if rec.iter <= prev_it:
                raise TraceFormatError("iter column must be strictly increasing")
            if rec.time_ms < prev_t:
                raise TraceFormatError("time_ms column must be nondecreasing")
            prev_it, prev_t = rec.iter, rec.time_ms
        return self

    def iters_to_threshold(self, threshold=None):
        """First iteration at which stop_metric <= threshold, else None."""
        thr = self.stop_threshold if threshold is None else threshold
        for rec in self.records:
            if rec.stop_metric <= thr:
                return rec.iter
        return None

    @property
    def final(self) -> IterRecord:
        return self.records[-1]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _meta_line(trace: RunTrace) -> str:
    return (
        f"# natmo-trace run_id={trace.run_id} problem={trace.problem} "
        f"method={trace.method} seed={trace.seed} "
        f"stop_threshold={_fmt(trace.stop_threshold)}"
    )


def _row_line(rec: IterRecord) -> str:
    return ",".join(
        [str(rec.iter), _fmt(rec.time_ms), _fmt(rec.train_loss), _fmt(rec.stop_metric),
         _fmt(rec.test_metric), _fmt(rec.alpha), _fmt(rec.beta), _fmt(rec.grad_norm)]
    )


def serialize_trace(trace: RunTrace) -> str:
    lines = [_meta_line(trace), HEADER]
    lines.extend(_row_line(r) for r in trace.records)
    lines.append(f"# status={trace.status}")
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> RunTrace:
    meta = {}
    status = None
    records = []
    saw_header = False
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("# ").strip()
            if body.startswith("natmo-trace"):
                for tok in body.split()[1:]:
                    key, _, val = tok.partition("=")
                    meta[key] = val
            elif body.startswith("status="):
                if status is not None:
                    raise TraceFormatError("status set more than once")
                status = body.partition("=")[2]
            continue
        if not saw_header:
            if line != HEADER:
                raise TraceFormatError(f"unexpected header {line!r}")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != 8:
            raise TraceFormatError(f"malformed row {line!r}")
        records.append(
            IterRecord(int(parts[0]), *(float(p) for p in parts[1:]))
        )
    for key in ("run_id", "problem", "method", "seed", "stop_threshold"):
        if key not in meta:
            raise TraceFormatError(f"missing metadata key {key}")
    if status is None:
        raise TraceFormatError("missing terminal status")
    trace = RunTrace(
        run_id=meta["run_id"],
        problem=meta["problem"],
        method=meta["method"],
        seed=int(meta["seed"]),
        stop_threshold=float(meta["stop_threshold"]),
        records=records,
        status=status,
    )
    return trace.validate()


def write_trace(trace: RunTrace, path):
    with open(path, "w") as fh:
        fh.write(serialize_trace(trace))


def read_trace(path) -> RunTrace:
    with open(path) as fh:
        return parse_trace(fh.read())


class TraceWriter:
    """Streams rows to ``<path>.partial`` (flushed per row) and atomically
    renames to ``<path>`` once the terminal status is known."""

    def __init__(self, path, run_id, problem, method, seed, stop_threshold):
        self.path = str(path)
        self.trace = RunTrace(run_id, problem, method, int(seed), float(stop_threshold))
        self._fh = open(self.path + ".partial", "w")
        self._fh.write(_meta_line(self.trace) + "\n" + HEADER + "\n")
        self._fh.flush()

    def append(self, rec: IterRecord):
        self.trace.records.append(rec)
        self._fh.write(_row_line(rec) + "\n")
        self._fh.flush()

    def finalize(self, status: str) -> RunTrace:
        self.trace.status = status
        self._fh.write(f"# status={status}\n")
        self._fh.flush()
        self._fh.close()
        os.replace(self.path + ".partial", self.path)
        return self.trace.validate()

    def abort(self):
        if not self._fh.closed:
            self._fh.close()
