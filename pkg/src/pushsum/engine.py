"""Deterministic discrete-event simulation loop.

Binds a schedule trace to the per-node protocol: ticks advance 1..K,
deliveries materialize into inboxes first, then awake nodes step in
ascending index. A run is a pure function of its arguments.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import protocol, schedule as sched, stats
from .errors import ProtocolError, RunError
from .graph import DirectedGraph

# Stream tags for the counter-based seed split: changing the topology or
# adding agents must not perturb other agents' observation sequences.
_STREAM_SCHEDULE = 0
_STREAM_OBSERVATIONS = 1


def schedule_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _STREAM_SCHEDULE)))


def observation_rng(seed: int, agent: int) -> np.random.Generator:
    return np.random.default_rng(
        np.random.SeedSequence((seed, _STREAM_OBSERVATIONS, agent))
    )


@dataclass
class BeliefTrace:
    """Per-tick record of a learning run. Beliefs are stored in log space;
    linear beliefs are exposed for output. States are carried forward on
    ticks where an agent sleeps."""

    horizon: int
    n: int
    m: int
    log_mu: list  # [tick][agent][hypothesis]
    y: list  # [tick][agent]
    wake: np.ndarray
    mass_residuals: list
    stale_drops: int
    history: RunHistory | None = None
    schedule: sched.ScheduleTrace | None = None

    def beliefs(self, tick: int, agent: int) -> list[float]:
        return [math.exp(v) for v in self.log_mu[tick][agent]]

    def log_belief_ratio(self, tick: int, agent: int, theta_v: int, theta_w: int) -> float:
        row = self.log_mu[tick][agent]
        return row[theta_v] - row[theta_w]

    def max_mass_residual(self) -> float:
        return max(self.mass_residuals)

    def to_csv(self) -> str:
        header = "tick,agent,wake," + "y," + ",".join(
            f"belief_{t}" for t in range(self.m)
        )
        lines = [header]
        for k in range(self.horizon + 1):
            for i in range(self.n):
                wake = 1 if (k > 0 and self.wake[k, i]) else 0
                beliefs = ",".join(repr(b) for b in self.beliefs(k, i))
                lines.append(f"{k},{i},{wake},{self.y[k][i]!r},{beliefs}")
        return "\n".join(lines) + "\n"


@dataclass
class RapsTrace:
    """Per-tick record of a consensus run."""

    horizon: int
    n: int
    x0: list
    x: list  # [tick][agent]
    y: list
    z: list
    wake: np.ndarray
    mass_residuals: list
    stale_drops: int
    history: RunHistory | None = None
    schedule: sched.ScheduleTrace | None = None

    def max_mass_residual(self) -> float:
        return max(self.mass_residuals)

    def to_csv(self) -> str:
        lines = ["tick,agent,wake,y,x,z"]
        for k in range(self.horizon + 1):
            for i in range(self.n):
                wake = 1 if (k > 0 and self.wake[k, i]) else 0
                lines.append(
                    f"{k},{i},{wake},{self.y[k][i]!r},{self.x[k][i]!r},{self.z[k][i]!r}"
                )
        return "\n".join(lines) + "\n"


@dataclass
class RunHistory:
    """Full per-tick protocol state, retained only in audit mode."""

    phi_y: list = field(default_factory=list)  # [tick][agent]
    log_phi_mu: list = field(default_factory=list)  # [tick][agent][theta]
    rho_y: list = field(default_factory=list)  # [tick][edge -> float]
    log_rho_mu: list = field(default_factory=list)  # [tick][edge -> [theta]]
    observations: list = field(default_factory=list)  # [tick][agent -> value]


class Simulation:
    """One deterministic run bound to a materialized schedule trace.

    kind is 'learning' (needs model) or 'raps' (needs x0). Observations
    default to sampling from per-agent streams; fixed tapes (one list per
    agent, consumed per wake event) may be supplied instead.
    """

    def __init__(
        self,
        graph: DirectedGraph,
        trace: sched.ScheduleTrace,
        kind: str = "learning",
        model: stats.HypothesisModel | None = None,
        x0: list[float] | None = None,
        seed: int = 0,
        observations: list[list] | None = None,
        record_history: bool = False,
    ):
        if trace.n != graph.n:
            raise RunError(f"trace n={trace.n} does not match graph n={graph.n}")
        self.graph = graph
        self.trace = trace
        self.kind = kind
        self.model = model
        self.contexts = protocol.node_contexts(graph)
        self.tick_now = 0
        self.stale_drops = 0
        self.pending = {e: deque() for e in graph.edges}
        self.inbox_buffer: list[list] = [[] for _ in range(graph.n)]
        self.observations = observations
        self.wake_counts = [0] * graph.n
        if kind == "learning":
            if model is None:
                raise RunError("learning run needs a hypothesis model")
            self.states = protocol.init_learning_network(graph, model)
            if observations is None:
                self.obs_rngs = [observation_rng(seed, i) for i in range(graph.n)]
        elif kind == "raps":
            if x0 is None:
                raise RunError("raps run needs initial values x0")
            self.states = protocol.init_raps_network(graph, list(x0))
        else:
            raise RunError(f"unknown protocol kind {kind!r}")
        if record_history and kind != "learning":
            raise RunError("history retention is only supported for learning runs")
        self.history = RunHistory() if record_history else None
        if record_history:
            self._record_history({})

    def mass_residual(self) -> float:
        """|sum of node weights plus pending per-edge mass minus n|."""
        total = sum(s.y for s in self.states)
        for (i, j) in self.graph.edges:
            total += self.states[i].phi_y - self.states[j].rho_y[i]
        return abs(total - self.graph.n)

    def _observe(self, i: int):
        if self.observations is not None:
            tape = self.observations[i]
            idx = self.wake_counts[i]
            if idx >= len(tape):
                raise RunError(f"observation tape for agent {i} exhausted")
            return tape[idx]
        return stats.sample(self.model, i, self.obs_rngs[i])

    def _record_history(self, obs_by_agent: dict):
        h = self.history
        h.phi_y.append([s.phi_y for s in self.states])
        h.log_phi_mu.append([list(s.log_phi_mu) for s in self.states])
        h.rho_y.append(
            {(i, j): self.states[j].rho_y[i] for (i, j) in self.graph.edges}
        )
        h.log_rho_mu.append(
            {(i, j): list(self.states[j].log_rho_mu[i]) for (i, j) in self.graph.edges}
        )
        h.observations.append(obs_by_agent)

    def tick(self) -> None:
        self.tick_now += 1
        k = self.tick_now
        if k > self.trace.horizon:
            raise RunError("ticked past the trace horizon")

        # Materialize deliveries due by this tick, in per-edge arrival order.
        for e in self.graph.edges:
            q = self.pending[e]
            while q and q[0][0] <= k:
                _, msg = q.popleft()
                self.inbox_buffer[e[1]].append(msg)

        obs_by_agent = {}
        broadcasts = []
        for i in range(self.graph.n):
            if not self.trace.wake[k, i]:
                continue
            inbox = self.inbox_buffer[i]
            self.inbox_buffer[i] = []
            try:
                if self.kind == "learning":
                    x = self._observe(i)
                    self.wake_counts[i] += 1
                    obs_by_agent[i] = x
                    log_lik = stats.log_likelihood_vector(self.model, i, x)
                    msg, stale = protocol.learning_wake_step(
                        self.states[i], self.contexts[i], inbox, log_lik, k
                    )
                else:
                    msg, stale = protocol.raps_wake_step(
                        self.states[i], self.contexts[i], inbox, k
                    )
            except ProtocolError as exc:
                raise RunError(f"tick {k}, node {i}: {exc}") from exc
            self.stale_drops += stale
            broadcasts.append((i, msg))

        # Enqueue broadcasts per out-edge with the trace's outcome.
        for i, msg in broadcasts:
            for j in self.graph.out_neighbors[i]:
                delay = self.trace.edge_outcomes((i, j)).get(k)
                if delay is not None:
                    self.pending[(i, j)].append((k + delay, msg))

        if self.history is not None:
            self._record_history(obs_by_agent)


def run(
    graph: DirectedGraph,
    params: sched.NetworkParams,
    horizon: int,
    seed: int = 0,
    kind: str = "learning",
    model: stats.HypothesisModel | None = None,
    x0: list[float] | None = None,
    trace: sched.ScheduleTrace | None = None,
    observations: list[list] | None = None,
    record_history: bool = False,
):
    """Run a full simulation and return its trace.

    Returns a BeliefTrace for learning runs or a RapsTrace for consensus
    runs; in audit mode the RunHistory is attached as `.history`.
    """
    if trace is None:
        trace = sched.generate_schedule(params, graph, horizon, schedule_rng(seed))
    sim = Simulation(
        graph,
        trace,
        kind=kind,
        model=model,
        x0=x0,
        seed=seed,
        observations=observations,
        record_history=record_history,
    )
    residuals = [sim.mass_residual()]
    if kind == "learning":
        log_mu = [[list(s.log_mu) for s in sim.states]]
        ys = [[s.y for s in sim.states]]
        for _ in range(horizon):
            sim.tick()
            residuals.append(sim.mass_residual())
            log_mu.append([list(s.log_mu) for s in sim.states])
            ys.append([s.y for s in sim.states])
        out = BeliefTrace(
            horizon=horizon,
            n=graph.n,
            m=model.m,
            log_mu=log_mu,
            y=ys,
            wake=trace.wake,
            mass_residuals=residuals,
            stale_drops=sim.stale_drops,
        )
    else:
        xs = [[s.x for s in sim.states]]
        ys = [[s.y for s in sim.states]]
        zs = [[s.z for s in sim.states]]
        for _ in range(horizon):
            sim.tick()
            residuals.append(sim.mass_residual())
            xs.append([s.x for s in sim.states])
            ys.append([s.y for s in sim.states])
            zs.append([s.z for s in sim.states])
        out = RapsTrace(
            horizon=horizon,
            n=graph.n,
            x0=list(x0),
            x=xs,
            y=ys,
            z=zs,
            wake=trace.wake,
            mass_residuals=residuals,
            stale_drops=sim.stale_drops,
        )
    out.history = sim.history
    out.schedule = trace
    return out
