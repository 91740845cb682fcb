"""Theory verification on recorded runs.

Covers the consensus-contraction constants and their decay bound, the
asymptotic belief-decay rate estimate and its predicted value, trace-level
audits of the auxiliary linear-process recursions, and an independently
coded synchronous reference used as an equivalence oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from . import stats
from .engine import BeliefTrace, RapsTrace
from .errors import DegenerateBoundError, HistoryMissingError, WindowTooShortError
from .graph import DirectedGraph
from .protocol import logsumexp
from .schedule import ScheduleTrace

mpmath.mp.dps = 60


@dataclass(frozen=True)
class ContractionConstants:
    """Contraction constants of the consensus decay bound.

    alpha = n^(-n*l_s) underflows double precision already for modest
    networks, so the constants are carried as arbitrary-precision values;
    log_alpha and log_lambda are plain floats for reporting.
    """

    n: int
    l_s: int
    alpha: mpmath.mpf
    delta: mpmath.mpf
    lam: mpmath.mpf
    log_alpha: float
    log_lambda: float

    def bound(self, k: int, x0_l1: float) -> float:
        """delta * lambda^k * ||x(0)||_1 as a float (may round to delta*norm)."""
        return float(self.delta * mpmath.power(self.lam, k) * mpmath.mpf(x0_l1))


def contraction_constants(n: int, l_del: int, l_u: int, l_f: int) -> ContractionConstants:
    if n < 2 or min(l_del, l_u, l_f) < 1:
        raise ValueError("need n >= 2 and all bounds >= 1")
    l_s = l_u * (l_f + 1) + l_del + l_u - 1
    log_alpha = -n * l_s * math.log(n)
    # n * alpha^6 can be as small as 10^-thousands; work at enough digits
    # that 1 - n*alpha^6 stays strictly below 1.
    dps = max(60, int(6 * n * l_s * math.log10(n)) + 30)
    with mpmath.workdps(dps):
        alpha = mpmath.power(n, -n * l_s)
        n_alpha6 = n * alpha**6
        if n_alpha6 >= 1:
            raise DegenerateBoundError(f"n * alpha^6 = {n_alpha6} >= 1")
        delta = 1 / (1 - n_alpha6)
        lam = (1 - n_alpha6) ** (mpmath.mpf(1) / (2 * n * l_s))
        log_lambda = float(mpmath.log(lam))
    return ContractionConstants(
        n=n,
        l_s=l_s,
        alpha=alpha,
        delta=delta,
        lam=lam,
        log_alpha=log_alpha,
        log_lambda=log_lambda,
    )


@dataclass(frozen=True)
class RapsDecayReport:
    bound_satisfied: bool
    max_violation: float  # worst (error - bound), negative when satisfied
    empirical_rate: float | None  # fitted per-tick geometric factor


def check_raps_decay(
    trace: RapsTrace, constants: ContractionConstants
) -> RapsDecayReport:
    """Check |z_i(k) - mean(x0)| <= delta * lambda^k * ||x0||_1 tick-wise
    and fit the empirical geometric decay rate of the consensus error."""
    mean = sum(trace.x0) / len(trace.x0)
    x0_l1 = sum(abs(v) for v in trace.x0)
    worst = -math.inf
    ks, logs = [], []
    for k in range(trace.horizon + 1):
        bound = constants.bound(k, x0_l1)
        err_k = max(abs(z - mean) for z in trace.z[k])
        worst = max(worst, err_k - bound)
        if err_k > 1e-13:
            ks.append(k)
            logs.append(math.log(err_k))
    rate = None
    if len(ks) >= 2:
        slope = np.polyfit(np.asarray(ks, dtype=float), np.asarray(logs), 1)[0]
        rate = math.exp(slope)
    return RapsDecayReport(
        bound_satisfied=worst <= 0.0, max_violation=worst, empirical_rate=rate
    )


@dataclass(frozen=True)
class RateEstimate:
    """Endpoint-differenced slopes of (1/k) log belief ratios.

    slopes is keyed (agent, theta_v, theta_w) for theta_v outside and
    theta_w inside the optimal set; predicted is the almost-sure limit
    -(1/n) sum_i D_KL(P_thetaw^i || P_thetav^i); bound is the optimality
    gap rate -(1/n) min_{theta not optimal} (F(theta) - F*). The two
    coincide only on well-specified configurations.
    """

    slopes: dict
    predicted: dict
    bound: float | None
    theta_star: tuple[int, ...]

    def mean_slope(self, theta_v: int, theta_w: int) -> float:
        vals = [s for (a, v, w), s in self.slopes.items() if v == theta_v and w == theta_w]
        return sum(vals) / len(vals)


def estimate_rate(
    trace: BeliefTrace, model: stats.HypothesisModel, window_fraction: float = 0.5
) -> RateEstimate:
    obj = stats.objective(model)
    theta_star = set(obj.theta_star)
    losers = [t for t in range(model.m) if t not in theta_star]
    k_hi = trace.horizon
    k_lo = int(round((1.0 - window_fraction) * k_hi))
    if k_hi - k_lo < 2:
        raise WindowTooShortError("window spans fewer than 2 ticks")
    log_half = math.log(0.5)
    for k in range(k_lo, k_hi + 1):
        for i in range(trace.n):
            for v in losers:
                if trace.log_mu[k][i][v] >= log_half:
                    raise WindowTooShortError(
                        f"belief on non-optimal hypothesis {v} still >= 0.5 "
                        f"at tick {k} (agent {i})"
                    )
    slopes = {}
    predicted = {}
    for v in losers:
        for w in sorted(theta_star):
            predicted[(v, w)] = -(
                sum(
                    stats.kl_divergence(
                        model.likelihoods[i][w], model.likelihoods[i][v]
                    )
                    for i in range(model.n)
                )
                / model.n
            )
            for i in range(trace.n):
                lr_hi = trace.log_belief_ratio(k_hi, i, v, w)
                lr_lo = trace.log_belief_ratio(k_lo, i, v, w)
                slopes[(i, v, w)] = (lr_hi - lr_lo) / (k_hi - k_lo)
    bound = -obj.gap / model.n if obj.gap is not None else None
    return RateEstimate(slopes, predicted, bound, obj.theta_star)


def synchronous_reference(
    graph: DirectedGraph,
    model: stats.HypothesisModel,
    observations: list[list],
    horizon: int,
) -> tuple[list, list]:
    """Directly iterated synchronous recursion: every node wakes every
    tick, each share travels exactly one tick, no cumulative-sum or mirror
    machinery. Returns (log_mu, y) trajectories indexed [tick][agent].

    The incremental weight recursion is
        y_i' = y_i / (d_i + 1) + sum over in-neighbors j of a_j
    where a_j is the share node j emitted on the previous tick, and the
    log-belief aggregation carries the matching share-weighted terms.
    """
    n, m = graph.n, model.m
    y = [1.0] * n
    log_mu = [[-math.log(m)] * m for _ in range(n)]
    prev_a = [0.0] * n
    prev_b = [[0.0] * m for _ in range(n)]
    traj_mu = [[list(row) for row in log_mu]]
    traj_y = [list(y)]
    for t in range(1, horizon + 1):
        a = [y[j] / (graph.out_degree(j) + 1) for j in range(n)]
        b = [[a[j] * log_mu[j][th] for th in range(m)] for j in range(n)]
        new_y = [0.0] * n
        new_mu = [[0.0] * m for _ in range(n)]
        for i in range(n):
            y_hat = a[i]
            for j in graph.in_neighbors[i]:
                y_hat += prev_a[j]
            log_lik = stats.log_likelihood_vector(model, i, observations[i][t - 1])
            unnorm = [0.0] * m
            for th in range(m):
                acc = b[i][th] + log_lik[th]
                for j in graph.in_neighbors[i]:
                    acc += prev_b[j][th]
                unnorm[th] = acc / y_hat
            z = logsumexp(unnorm)
            new_y[i] = y_hat
            new_mu[i] = [v - z for v in unnorm]
        y, log_mu = new_y, new_mu
        prev_a, prev_b = a, b
        traj_mu.append([list(row) for row in log_mu])
        traj_y.append(list(y))
    return traj_mu, traj_y


@dataclass(frozen=True)
class AuditReport:
    max_residual: float
    residuals: dict  # per identity: 'phi_increment', 'belief_update', 'loss_buffer', 'delay_buffer'


def _reconstruct_commits(trace: ScheduleTrace, graph: DirectedGraph, l_d: int):
    """Effective-delay indicators from the trace alone.

    For each edge, replay which delivered message the receiver actually
    applies at each of its wakes (the newest arrived one; earlier arrivals
    are superseded and their mass rides the next applied cumulative sum).
    Returns {edge: {send_tick: effective_delay}} where effective delay is
    commit tick minus send tick.
    """
    commits: dict = {}
    for e in trace.edges:
        i, j = e
        sends = sorted(
            (s, s + d) for s, d in trace.edge_outcomes(e).items() if d is not None
        )
        commits[e] = {}
        idx = 0
        for p in range(1, trace.horizon + 1):
            if not trace.wake[p, j]:
                continue
            newest = None
            while idx < len(sends) and sends[idx][1] <= p:
                newest = sends[idx][0]
                idx += 1
            if newest is not None:
                l = p - newest
                if l > l_d:
                    raise AssertionError(
                        f"effective delay {l} exceeds bound {l_d} on edge {e}"
                    )
                commits[e][newest] = l
    return commits


def audit_recursions(
    trace: BeliefTrace,
    schedule_trace: ScheduleTrace,
    graph: DirectedGraph,
    model: stats.HypothesisModel,
    theta_v: int,
    theta_w: int,
    l_d: int,
) -> AuditReport:
    """Replay the auxiliary linear-process recursions against a recorded
    run and return the worst identity residual.

    Checks, at every tick, for the hypothesis pair (theta_v, theta_w):
      - the cumulative log-mass ratio increment identity,
      - the weighted belief log-ratio update fed by the delay buffers,
      - the loss-buffer recursion against its cumulative-sum definition,
      - the delay-buffer recursions via the committed mirror increments.
    """
    if trace.history is None:
        raise HistoryMissingError("run was not recorded in audit mode")
    h = trace.history
    n = graph.n
    K = trace.horizon
    floor = math.log(model.beta)

    def loglik_ratio(agent: int, x) -> float:
        lv = max(model.likelihoods[agent][theta_v].log_density(x), floor)
        lw = max(model.likelihoods[agent][theta_w].log_density(x), floor)
        return lv - lw

    commits = _reconstruct_commits(schedule_trace, graph, l_d)

    # phi_bar_i(k) = y_i(k) * log belief ratio, straight from history.
    phi_bar = [
        [trace.y[k][i] * (trace.log_mu[k][i][theta_v] - trace.log_mu[k][i][theta_w])
         for i in range(n)]
        for k in range(K + 1)
    ]

    def d_log_phi(k: int, i: int) -> float:
        now = h.log_phi_mu[k][i]
        prev = h.log_phi_mu[k - 1][i]
        return (now[theta_v] - now[theta_w]) - (prev[theta_v] - prev[theta_w])

    res = {"phi_increment": 0.0, "belief_update": 0.0,
           "loss_buffer": 0.0, "delay_buffer": 0.0}
    upsilon = {e: 0.0 for e in graph.edges}
    buffers = {e: [0.0] * (l_d + 2) for e in graph.edges}  # index by level 1..l_d

    for k in range(1, K + 1):
        # (i) cumulative log-mass ratio increment
        for i in range(n):
            tau_i = 1.0 if schedule_trace.wake[k, i] else 0.0
            expected = (
                tau_i
                * (trace.y[k - 1][i] / (graph.out_degree(i) + 1))
                * (trace.log_mu[k - 1][i][theta_v] - trace.log_mu[k - 1][i][theta_w])
            )
            res["phi_increment"] = max(
                res["phi_increment"], abs(d_log_phi(k, i) - expected)
            )

        new_upsilon = {}
        new_buffers = {}
        for e in graph.edges:
            i, _ = e
            d1 = graph.out_degree(i) + 1
            level = commits[e].get(k)  # effective delay if this send commits
            sender_awake = bool(schedule_trace.wake[k, i])
            dispatch = upsilon[e] + (phi_bar[k - 1][i] / d1 if sender_awake else 0.0)
            buf = buffers[e]
            new_buf = [0.0] * (l_d + 2)
            for l in range(1, l_d + 1):
                new_buf[l] = buf[l + 1] + (dispatch if level == l else 0.0)
            new_buffers[e] = new_buf

            # (iii) loss buffer: recursion vs cumulative-sum definition
            gate = 0.0 if level is not None else 1.0
            by_definition = gate * (upsilon[e] + d_log_phi(k, i))
            by_recursion = gate * dispatch
            res["loss_buffer"] = max(
                res["loss_buffer"], abs(by_definition - by_recursion)
            )
            new_upsilon[e] = by_definition

        # (iv) committed mirror increment equals the exiting buffer level
        for e in graph.edges:
            rho_now = h.log_rho_mu[k][e]
            rho_prev = h.log_rho_mu[k - 1][e]
            d_rho = (rho_now[theta_v] - rho_now[theta_w]) - (
                rho_prev[theta_v] - rho_prev[theta_w]
            )
            res["delay_buffer"] = max(
                res["delay_buffer"], abs(d_rho - buffers[e][1])
            )

        # (ii) weighted belief log-ratio update
        for j in range(n):
            tau_j = 1.0 if schedule_trace.wake[k, j] else 0.0
            expected = (1.0 - tau_j + tau_j / (graph.out_degree(j) + 1)) * phi_bar[
                k - 1
            ][j]
            for i in graph.in_neighbors[j]:
                expected += buffers[(i, j)][1]
            if tau_j:
                expected += loglik_ratio(j, h.observations[k][j])
            res["belief_update"] = max(
                res["belief_update"], abs(phi_bar[k][j] - expected)
            )

        upsilon = new_upsilon
        buffers = new_buffers

    return AuditReport(max_residual=max(res.values()), residuals=res)
