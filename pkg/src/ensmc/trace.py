"""Trace CSV files.

Integers are written as decimal integers and floats with ``repr``, so
reading a trace and writing it again reproduces the file byte for byte.
"""

import csv
import math

from .samplers import TraceRecord

_INT_FIELDS = ("iter", "slow_evals", "fast_evals")


def _fmt(name, v):
    return str(int(v)) if name in _INT_FIELDS else repr(float(v))


def write_trace(path, records):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(TraceRecord.FIELDS) + "\n")
        for r in records:
            fh.write(",".join(_fmt(f, getattr(r, f)) for f in TraceRecord.FIELDS) + "\n")


def read_trace(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TraceRecord.FIELDS:
        raise ValueError(f"{path}: not a trace file (header {rows[0] if rows else None})")
    out = []
    for line, row in enumerate(rows[1:], start=2):
        if len(row) != len(TraceRecord.FIELDS):
            raise ValueError(f"{path}:{line}: expected {len(TraceRecord.FIELDS)} fields")
        vals = {f: int(v) if f in _INT_FIELDS else float(v) for f, v in zip(TraceRecord.FIELDS, row)}
        out.append(TraceRecord(**vals))
    return out


def column(records, name):
    return [getattr(r, name) for r in records]


def rejection(rate):
    return None if math.isnan(rate) else 1.0 - rate
