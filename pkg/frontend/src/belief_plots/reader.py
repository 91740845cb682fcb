"""Trace CSV parsing and re-validation.

Expected schema: header `tick,agent,wake,y,belief_0,...,belief_{m-1}`,
one row per (tick, agent), ticks contiguous from 0.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np


class SchemaError(ValueError):
    """CSV header or rows do not match the trace contract."""


class EmptyTraceError(ValueError):
    """CSV parses but contains no data rows."""


EXPECTED_PREFIX = ("tick", "agent", "wake", "y")


@dataclass(frozen=True)
class TraceData:
    n: int
    m: int
    ticks: np.ndarray  # shape (K+1,)
    beliefs: np.ndarray  # shape (K+1, n, m)
    wake: np.ndarray  # shape (K+1, n), 0/1


def read_trace_csv(text: str, sum_tol: float = 1e-6) -> TraceData:
    """Parse and re-validate a trace CSV; belief rows must sum to 1."""
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("empty file, no header") from None
    if tuple(header[:4]) != EXPECTED_PREFIX:
        raise SchemaError(
            f"header must start with {','.join(EXPECTED_PREFIX)}, got "
            f"{','.join(header[:4])}"
        )
    belief_cols = header[4:]
    expected = [f"belief_{t}" for t in range(len(belief_cols))]
    if not belief_cols or belief_cols != expected:
        raise SchemaError(
            f"belief columns must be {','.join(expected) or 'belief_0..'}, "
            f"got {','.join(belief_cols)}"
        )
    m = len(belief_cols)

    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != 4 + m:
            raise SchemaError(f"line {lineno}: expected {4 + m} fields, got {len(row)}")
        try:
            rows.append(
                (int(row[0]), int(row[1]), int(row[2]),
                 [float(v) for v in row[4:]])
            )
        except ValueError as exc:
            raise SchemaError(f"line {lineno}: {exc}") from None
    if not rows:
        raise EmptyTraceError("no data rows")

    n = max(r[1] for r in rows) + 1
    k_max = max(r[0] for r in rows)
    beliefs = np.full((k_max + 1, n, m), np.nan)
    wake = np.zeros((k_max + 1, n), dtype=np.int8)
    ticks = np.arange(k_max + 1)
    for k, agent, w, bs in rows:
        beliefs[k, agent] = bs
        wake[k, agent] = w
    if np.isnan(beliefs).any():
        k, agent = map(int, np.argwhere(np.isnan(beliefs[:, :, 0]))[0])
        raise SchemaError(f"missing row for tick {k}, agent {agent}")

    sums = beliefs.sum(axis=2)
    worst = float(np.abs(sums - 1.0).max())
    if worst > sum_tol:
        k, agent = map(int, np.unravel_index(np.abs(sums - 1.0).argmax(), sums.shape))
        raise SchemaError(
            f"beliefs at tick {k}, agent {agent} sum to {sums[k, agent]!r}, "
            f"off by {worst:.2e} > {sum_tol:.0e}"
        )
    return TraceData(n=n, m=m, ticks=ticks, beliefs=beliefs, wake=wake)
