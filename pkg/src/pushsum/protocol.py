"""Per-node state machines for the learning and consensus protocols.

Nodes exchange cumulative sums (phi) and mirror the last applied values
(rho), so a lost message's content is recovered by the next delivery.
All multiplicative belief quantities live in log space: beliefs on wrong
hypotheses decay exponentially and would underflow within hundreds of
ticks if stored linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import NonpositiveWeightError, SizeMismatchError, StaleTickError
from .graph import DirectedGraph


def logsumexp(values: list[float]) -> float:
    hi = max(values)
    if hi == -math.inf:
        return -math.inf
    return hi + math.log(sum(math.exp(v - hi) for v in values))


@dataclass(frozen=True)
class NodeContext:
    """Static topology facts a node needs: its index, out-degree, in-neighbors."""

    index: int
    out_degree: int
    in_neighbors: tuple[int, ...]


def node_contexts(graph: DirectedGraph) -> list[NodeContext]:
    return [
        NodeContext(i, graph.out_degree(i), graph.in_neighbors[i])
        for i in range(graph.n)
    ]


@dataclass(frozen=True)
class LearningMessage:
    """Snapshot broadcast after the sender's accumulation phase."""

    sender: int
    phi_y: float
    log_phi_mu: tuple[float, ...]
    kappa: int  # sender's wake tick


@dataclass
class LearningNodeState:
    y: float
    phi_y: float
    log_phi_mu: list[float]
    log_mu: list[float]
    kappa_i: int
    # per in-neighbor mirrors of the last applied cumulative values
    rho_y: dict[int, float]
    log_rho_mu: dict[int, list[float]]
    kappa: dict[int, int]

    def beliefs(self) -> list[float]:
        return [math.exp(v) for v in self.log_mu]


def init_learning_node(m: int, in_neighbors: tuple[int, ...]) -> LearningNodeState:
    log_uniform = -math.log(m)
    return LearningNodeState(
        y=1.0,
        phi_y=0.0,
        log_phi_mu=[0.0] * m,
        log_mu=[log_uniform] * m,
        kappa_i=0,
        rho_y={j: 0.0 for j in in_neighbors},
        log_rho_mu={j: [0.0] * m for j in in_neighbors},
        kappa={j: 0 for j in in_neighbors},
    )


def init_learning_network(graph: DirectedGraph, model) -> list[LearningNodeState]:
    if model.n != graph.n:
        raise SizeMismatchError(
            f"model has {model.n} agents, graph has {graph.n} nodes"
        )
    return [init_learning_node(model.m, graph.in_neighbors[i]) for i in range(graph.n)]


def learning_wake_step(
    state: LearningNodeState,
    ctx: NodeContext,
    inbox: list[LearningMessage],
    log_lik: list[float],
    tick: int,
) -> tuple[LearningMessage, int]:
    """Execute one wake: accumulate-and-broadcast, apply fresh messages,
    then update the belief. Mutates state; returns (broadcast, stale drops).

    log_lik holds the floored log-likelihood of this wake's observation
    under every hypothesis.
    """
    if tick <= state.kappa_i:
        raise StaleTickError(f"tick {tick} not after last wake {state.kappa_i}")
    m = len(state.log_mu)
    share = state.y / (ctx.out_degree + 1)

    # Phase 1: accumulate own mass and snapshot the broadcast.
    state.kappa_i = tick
    state.phi_y += share
    for t in range(m):
        state.log_phi_mu[t] += share * state.log_mu[t]
    broadcast = LearningMessage(
        sender=ctx.index,
        phi_y=state.phi_y,
        log_phi_mu=tuple(state.log_phi_mu),
        kappa=tick,
    )

    # Phase 2: stage the newest message per in-edge; drop stale ones.
    staged_y = dict(state.rho_y)
    staged_mu: dict[int, tuple[float, ...] | list[float]] = {
        j: state.log_rho_mu[j] for j in state.log_rho_mu
    }
    stale = 0
    for msg in inbox:
        j = msg.sender
        if msg.kappa > state.kappa[j]:
            staged_y[j] = msg.phi_y
            staged_mu[j] = msg.log_phi_mu
            state.kappa[j] = msg.kappa
        else:
            stale += 1

    # Phase 3: weight and belief update.
    y_hat = share
    for j in ctx.in_neighbors:
        y_hat += staged_y[j] - state.rho_y[j]
    if y_hat <= 0.0:
        raise NonpositiveWeightError(
            f"weight {y_hat} <= 0 at tick {tick}; trace violates the "
            f"network assumptions"
        )
    unnorm = [0.0] * m
    for t in range(m):
        acc = share * state.log_mu[t] + log_lik[t]
        for j in ctx.in_neighbors:
            acc += staged_mu[j][t] - state.log_rho_mu[j][t]
        unnorm[t] = acc / y_hat
    z = logsumexp(unnorm)
    state.log_mu = [v - z for v in unnorm]
    state.y = y_hat
    for j in ctx.in_neighbors:
        state.rho_y[j] = staged_y[j]
        mu_j = staged_mu[j]
        if mu_j is not state.log_rho_mu[j]:
            state.log_rho_mu[j] = list(mu_j)
    return broadcast, stale


@dataclass(frozen=True)
class RapsMessage:
    sender: int
    phi_y: float
    phi_x: float
    kappa: int


@dataclass
class RapsNodeState:
    x: float
    y: float
    phi_x: float
    phi_y: float
    kappa_i: int
    rho_x: dict[int, float]
    rho_y: dict[int, float]
    kappa: dict[int, int]
    z: float = field(default=0.0)

    def __post_init__(self):
        self.z = self.x / self.y


def init_raps_network(graph: DirectedGraph, x0: list[float]) -> list[RapsNodeState]:
    if len(x0) != graph.n:
        raise SizeMismatchError(f"x0 has {len(x0)} entries, graph has {graph.n} nodes")
    return [
        RapsNodeState(
            x=float(x0[i]),
            y=1.0,
            phi_x=0.0,
            phi_y=0.0,
            kappa_i=0,
            rho_x={j: 0.0 for j in graph.in_neighbors[i]},
            rho_y={j: 0.0 for j in graph.in_neighbors[i]},
            kappa={j: 0 for j in graph.in_neighbors[i]},
        )
        for i in range(graph.n)
    ]


def raps_wake_step(
    state: RapsNodeState,
    ctx: NodeContext,
    inbox: list[RapsMessage],
    tick: int,
) -> tuple[RapsMessage, int]:
    """Consensus wake step: same structure as the learning step with linear
    accumulation of the averaged value x."""
    if tick <= state.kappa_i:
        raise StaleTickError(f"tick {tick} not after last wake {state.kappa_i}")
    share_y = state.y / (ctx.out_degree + 1)
    share_x = state.x / (ctx.out_degree + 1)

    state.kappa_i = tick
    state.phi_y += share_y
    state.phi_x += share_x
    broadcast = RapsMessage(
        sender=ctx.index, phi_y=state.phi_y, phi_x=state.phi_x, kappa=tick
    )

    staged_y = dict(state.rho_y)
    staged_x = dict(state.rho_x)
    stale = 0
    for msg in inbox:
        j = msg.sender
        if msg.kappa > state.kappa[j]:
            staged_y[j] = msg.phi_y
            staged_x[j] = msg.phi_x
            state.kappa[j] = msg.kappa
        else:
            stale += 1

    y_new = share_y
    x_new = share_x
    for j in ctx.in_neighbors:
        y_new += staged_y[j] - state.rho_y[j]
        x_new += staged_x[j] - state.rho_x[j]
    if y_new <= 0.0:
        raise NonpositiveWeightError(
            f"weight {y_new} <= 0 at tick {tick}; trace violates the "
            f"network assumptions"
        )
    state.y = y_new
    state.x = x_new
    state.rho_y.update(staged_y)
    state.rho_x.update(staged_x)
    state.z = x_new / y_new
    return broadcast, stale
