"""Network event traces: wake-ups, link delays, and message losses.

A trace is fully materialized before simulation so runs can be replayed,
audited, and driven by hand-built adversarial fixtures. Generated traces
always satisfy the network assumptions: bounded delays, bounded sleep
intervals, bounded consecutive losses, and in-order per-link arrivals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError
from .graph import DirectedGraph

Edge = tuple[int, int]
# Per-edge transmission outcomes: send tick -> delay in ticks, or None if lost.
Outcomes = dict[Edge, dict[int, int | None]]


@dataclass(frozen=True)
class NetworkParams:
    l_del: int = 1  # max link delay (ticks)
    l_u: int = 1  # max sleep interval (ticks)
    l_f: int = 1  # max consecutive link failures
    p_w: float = 1.0  # wake probability per tick
    p_l: float = 0.0  # loss probability per transmission

    def __post_init__(self):
        if self.l_del < 1 or self.l_u < 1 or self.l_f < 1:
            raise ValueError("l_del, l_u, l_f must all be >= 1")
        if not (0.0 < self.p_w <= 1.0):
            raise ValueError("p_w must be in (0, 1]")
        if not (0.0 <= self.p_l < 1.0):
            raise ValueError("p_l must be in [0, 1)")

    @property
    def effective_delay_bound(self) -> int:
        """Max lag from send to the receiver's next processing wake."""
        return self.l_del + self.l_u - 1

    @property
    def l_s(self) -> int:
        """Max ticks between successful deliveries on any link."""
        return self.l_u * (self.l_f + 1) + self.l_del + self.l_u - 1


@dataclass(frozen=True)
class ScheduleTrace:
    """Materialized network events for ticks 1..horizon.

    wake has shape (horizon + 1, n); row 0 is unused (all False).
    outcomes[(i, j)][k] is the delay of the message node i sent on edge
    (i, j) at tick k, or None if it was lost. Entries exist exactly for
    the sender's wake ticks.
    """

    horizon: int
    n: int
    edges: tuple[Edge, ...]
    wake: np.ndarray = field(repr=False)
    outcomes: Outcomes = field(repr=False)

    def edge_outcomes(self, edge: Edge) -> dict[int, int | None]:
        return self.outcomes.get(edge, {})


@dataclass(frozen=True)
class Violation:
    clause: str  # 'b', 'c', 'd', or 'e'
    message: str
    tick: int | None = None
    edge: Edge | None = None


def generate_schedule(
    params: NetworkParams,
    graph: DirectedGraph,
    horizon: int,
    rng: np.random.Generator,
) -> ScheduleTrace:
    """Sample a trace satisfying every network assumption.

    Wakes are Bernoulli(p_w) with a forced wake after l_u - 1 consecutive
    sleeps; losses are Bernoulli(p_l) with a forced delivery after l_f
    consecutive losses; delays are uniform on {1..l_del}, minimally
    inflated to keep per-edge arrivals strictly increasing.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    n = graph.n
    wake = np.zeros((horizon + 1, n), dtype=bool)
    outcomes: Outcomes = {e: {} for e in graph.edges}
    sleep_run = [0] * n
    loss_run = {e: 0 for e in graph.edges}
    last_arrival = {e: 0 for e in graph.edges}

    for k in range(1, horizon + 1):
        for i in range(n):
            if sleep_run[i] >= params.l_u - 1:
                w = True
            elif params.p_w >= 1.0:
                w = True
            else:
                w = rng.random() < params.p_w
            wake[k, i] = w
            sleep_run[i] = 0 if w else sleep_run[i] + 1
        for i in range(n):
            if not wake[k, i]:
                continue
            for j in graph.out_neighbors[i]:
                e = (i, j)
                if loss_run[e] >= params.l_f:
                    lost = False
                elif params.p_l <= 0.0:
                    lost = False
                else:
                    lost = rng.random() < params.p_l
                if lost:
                    outcomes[e][k] = None
                    loss_run[e] += 1
                else:
                    loss_run[e] = 0
                    if params.l_del == 1:
                        d = 1
                    else:
                        d = int(rng.integers(1, params.l_del + 1))
                    # Minimal inflation to keep arrivals in send order; the
                    # previous arrival is at most k - 1 + l_del, so the
                    # floor never exceeds l_del.
                    d = max(d, last_arrival[e] + 1 - k)
                    outcomes[e][k] = d
                    last_arrival[e] = k + d
    return ScheduleTrace(horizon, n, graph.edges, wake, outcomes)


def validate_schedule(
    trace: ScheduleTrace, params: NetworkParams, graph: DirectedGraph
) -> Violation | None:
    """Check every clause of the network assumption; None means ok."""
    if trace.n != graph.n:
        raise DimensionMismatchError(
            f"trace has n={trace.n}, graph has n={graph.n}"
        )
    if trace.wake.shape != (trace.horizon + 1, trace.n):
        raise DimensionMismatchError("wake table shape does not match horizon")
    for e in trace.outcomes:
        if e not in graph.edges:
            raise DimensionMismatchError(f"trace edge {e} not in graph")

    # (c) no agent sleeps l_u consecutive ticks
    for i in range(trace.n):
        run = 0
        for k in range(1, trace.horizon + 1):
            run = 0 if trace.wake[k, i] else run + 1
            if run >= params.l_u:
                return Violation(
                    "c",
                    f"agent {i} slept {run} consecutive ticks ending at {k}",
                    tick=k,
                )

    for e in graph.edges:
        sends = sorted(trace.edge_outcomes(e).items())
        loss_streak = 0
        prev_arrival = 0
        for k, delay in sends:
            if delay is None:
                loss_streak += 1
                if loss_streak > params.l_f:
                    return Violation(
                        "d",
                        f"edge {e} lost {loss_streak} consecutive messages "
                        f"ending at tick {k}",
                        tick=k,
                        edge=e,
                    )
                continue
            loss_streak = 0
            # (b) bounded delays
            if not (1 <= delay <= params.l_del):
                return Violation(
                    "b",
                    f"edge {e} delay {delay} at tick {k} outside 1..{params.l_del}",
                    tick=k,
                    edge=e,
                )
            # (e) arrivals strictly increasing in send order
            arrival = k + delay
            if arrival <= prev_arrival:
                return Violation(
                    "e",
                    f"edge {e} message sent at {k} arrives at {arrival}, "
                    f"not after previous arrival {prev_arrival}",
                    tick=k,
                    edge=e,
                )
            prev_arrival = arrival
    return None


@dataclass(frozen=True)
class TauTables:
    """Wake indicators and per-message effective-delay indicators.

    tau[k, i] is 1 iff node i woke at tick k. tau_l[(i, j)][k] = l iff the
    message sent on (i, j) at tick k was delivered with delay l (arrival
    minus send as materialized in the trace); lost sends have no entry.
    """

    tau: np.ndarray
    tau_l: dict[Edge, dict[int, int]]


def tau_indicators(trace: ScheduleTrace) -> TauTables:
    tau = trace.wake.astype(np.int8)
    tau_l: dict[Edge, dict[int, int]] = {}
    for e in trace.edges:
        tau_l[e] = {
            k: d for k, d in trace.edge_outcomes(e).items() if d is not None
        }
    return TauTables(tau, tau_l)


def write_trace_file(trace: ScheduleTrace, params: NetworkParams) -> str:
    """Serialize to the trace file format.

    Header `K n L_del L_u L_f`, then the wake table (one 0/1 row per tick),
    then one `k i j {L|D d}` line per transmission.
    """
    lines = [f"{trace.horizon} {trace.n} {params.l_del} {params.l_u} {params.l_f}"]
    for k in range(1, trace.horizon + 1):
        lines.append(" ".join("1" if trace.wake[k, i] else "0" for i in range(trace.n)))
    for e in sorted(trace.outcomes):
        for k in sorted(trace.outcomes[e]):
            d = trace.outcomes[e][k]
            tail = "L" if d is None else f"D {d}"
            lines.append(f"{k} {e[0]} {e[1]} {tail}")
    return "\n".join(lines) + "\n"


def read_trace_file(text: str) -> tuple[ScheduleTrace, NetworkParams]:
    """Parse the trace file format; p_w and p_l are not recorded in the
    file and come back as the degenerate defaults (they do not affect
    validation or replay)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    horizon, n, l_del, l_u, l_f = (int(tok) for tok in lines[0].split())
    wake = np.zeros((horizon + 1, n), dtype=bool)
    for k in range(1, horizon + 1):
        row = lines[k].split()
        if len(row) != n:
            raise ValueError(f"wake row {k} has {len(row)} entries, expected {n}")
        wake[k] = [tok == "1" for tok in row]
    outcomes: Outcomes = {}
    for ln in lines[horizon + 1:]:
        parts = ln.split()
        k, i, j = int(parts[0]), int(parts[1]), int(parts[2])
        delay = None if parts[3] == "L" else int(parts[4])
        outcomes.setdefault((i, j), {})[k] = delay
    edges = tuple(sorted(outcomes))
    trace = ScheduleTrace(horizon, n, edges, wake, outcomes)
    params = NetworkParams(l_del=l_del, l_u=l_u, l_f=l_f, p_w=1.0, p_l=0.0)
    return trace, params
