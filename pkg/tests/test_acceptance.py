"""End-to-end acceptance checks.

Each test covers one shipped guarantee and prints a single pass/fail line
with the measured quantity and its tolerance.
"""

import itertools
import json
import math

import numpy as np

from pushsum import analysis, cli, config, engine, protocol, schedule, stats
from pushsum.graph import standard_topology
from pushsum.stats import log_likelihood_vector

from support import bernoulli_model, random_strongly_connected


def report(ok: bool, name: str, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# 1. Mass conservation ------------------------------------------------------

def test_mass_conservation():
    """Node weights plus pending link mass sum to n within 1e-12*n at every
    tick, on all six presets (K=500) and 20 random digraphs with random
    valid traces."""
    worst_rel = 0.0
    for name in config.PRESET_NAMES:
        cfg = config.load_preset(name)
        tr = engine.run(cfg.graph, cfg.params, 500, seed=0, model=cfg.model)
        worst_rel = max(worst_rel, tr.max_mass_residual() / cfg.graph.n)
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        g = random_strongly_connected(rng, n)
        params = schedule.NetworkParams(
            l_del=int(rng.integers(1, 4)),
            l_u=int(rng.integers(1, 6)),
            l_f=int(rng.integers(1, 6)),
            p_w=float(rng.uniform(0.3, 1.0)),
            p_l=float(rng.uniform(0.0, 0.4)),
        )
        ps = rng.uniform(0.2, 0.8, size=n)
        model = bernoulli_model(
            list(ps), [list(ps), list(np.clip(ps + 0.2, 0.05, 0.95))]
        )
        tr = engine.run(g, params, 250, seed=int(rng.integers(1 << 30)), model=model)
        worst_rel = max(worst_rel, tr.max_mass_residual() / n)
    report(worst_rel <= 1e-12, "mass conservation",
           f"max residual/n {worst_rel:.3e} <= 1e-12")


# 2. Synchronous oracle equivalence -----------------------------------------

def test_synchronous_oracle_equivalence(calibrated_model):
    """A run with p_w=1, p_l=0, L_del=1 matches the independently coded
    synchronous recursion within 1e-10 per tick/agent/hypothesis."""
    sync = schedule.NetworkParams()
    worst = 0.0
    for kind in ("star", "path", "cycle"):
        g = standard_topology(kind, 4)
        rngs = [engine.observation_rng(11, i) for i in range(4)]
        tapes = [
            [stats.sample(calibrated_model, i, rngs[i]) for _ in range(200)]
            for i in range(4)
        ]
        mu_ref, y_ref = analysis.synchronous_reference(g, calibrated_model, tapes, 200)
        tr = engine.run(g, sync, 200, seed=11, model=calibrated_model, observations=tapes)
        for k in range(201):
            for i in range(4):
                worst = max(worst, abs(tr.y[k][i] - y_ref[k][i]))
                for t in range(calibrated_model.m):
                    worst = max(worst, abs(tr.log_mu[k][i][t] - mu_ref[k][i][t]))
    report(worst <= 1e-10, "synchronous oracle equivalence",
           f"max deviation {worst:.3e} <= 1e-10")


# 3. Bayesian reduction ------------------------------------------------------

def test_bayesian_reduction():
    """An isolated node reproduces the exact Bayes posterior after every
    observation, to 1e-12, over 1000 random tapes and coin models."""
    rng = np.random.default_rng(7)
    ctx = protocol.NodeContext(index=0, out_degree=0, in_neighbors=())
    worst = 0.0
    for _ in range(1000):
        p_true = float(rng.uniform(0.2, 0.8))
        p0, p1 = rng.uniform(0.1, 0.9, size=2)
        model = bernoulli_model([p_true], [[float(p0)], [float(p1)]])
        state = protocol.init_learning_node(2, ())
        log_post = [math.log(0.5), math.log(0.5)]
        for k in range(1, 16):
            x = "H" if rng.random() < p_true else "T"
            protocol.learning_wake_step(
                state, ctx, [], log_likelihood_vector(model, 0, x), k
            )
            ll = log_likelihood_vector(model, 0, x)
            log_post = [log_post[t] + ll[t] for t in range(2)]
            z = protocol.logsumexp(log_post)
            log_post = [v - z for v in log_post]
            for t in range(2):
                worst = max(
                    worst,
                    abs(math.exp(state.log_mu[t]) - math.exp(log_post[t])),
                )
    report(worst <= 1e-12, "bayesian reduction",
           f"max posterior deviation {worst:.3e} <= 1e-12 over 1000 tapes")


# 4. Recursion audit ---------------------------------------------------------

def test_recursion_audit():
    """The auxiliary linear-process identities replay to <= 1e-9 on star-hi
    and path-lo at K=500 in audit mode; a tampered history is flagged with
    residual > 1e-3."""
    worst = 0.0
    tampered = None
    for name in ("star-hi", "path-lo"):
        cfg = config.load_preset(name)
        tr = engine.run(
            cfg.graph, cfg.params, 500, seed=cfg.seed, model=cfg.model,
            record_history=True,
        )
        obj = stats.objective(cfg.model)
        theta_w = obj.theta_star[0]
        for theta_v in range(cfg.model.m):
            if theta_v in obj.theta_star:
                continue
            rep = analysis.audit_recursions(
                tr, tr.schedule, cfg.graph, cfg.model, theta_v, theta_w,
                l_d=cfg.params.effective_delay_bound,
            )
            worst = max(worst, rep.max_residual)
        if tampered is None:
            tr.history.log_rho_mu[250][cfg.graph.edges[0]][0] += 0.01
            tampered = analysis.audit_recursions(
                tr, tr.schedule, cfg.graph, cfg.model, 0, theta_w,
                l_d=cfg.params.effective_delay_bound,
            ).max_residual
    ok = worst <= 1e-9 and tampered > 1e-3
    report(ok, "recursion audit",
           f"max residual {worst:.3e} <= 1e-9; tampered {tampered:.3e} > 1e-3")


# 5. Consensus contraction bound ---------------------------------------------

def test_consensus_contraction_bound():
    """|z_i(k) - mean(x0)| <= delta * lambda^k * ||x0||_1 tick-wise on raps
    runs shaped like every preset; star-lo reaches |z - 2.5| <= 1e-8 by
    K=2000. Tightness of the constants is not asserted."""
    x0 = [1.0, 2.0, 3.0, 4.0]
    worst_violation = -math.inf
    final_err = None
    for name in config.PRESET_NAMES:
        cfg = config.load_preset(name)
        constants = analysis.contraction_constants(
            cfg.graph.n, cfg.params.l_del, cfg.params.l_u, cfg.params.l_f
        )
        tr = engine.run(
            cfg.graph, cfg.params, 2000, seed=cfg.seed, kind="raps", x0=x0
        )
        rep = analysis.check_raps_decay(tr, constants)
        worst_violation = max(worst_violation, rep.max_violation)
        if name == "star-lo":
            final_err = max(abs(z - 2.5) for z in tr.z[2000])
    ok = worst_violation <= 0.0 and final_err <= 1e-8
    report(ok, "consensus contraction bound",
           f"worst (error - bound) {worst_violation:.3e} <= 0; "
           f"star-lo |z(2000) - 2.5| {final_err:.3e} <= 1e-8")


# 6. Belief concentration ----------------------------------------------------

def test_belief_concentration():
    """With the shipped calibrated model, every agent's belief on the
    KL-optimal hypothesis exceeds 0.95 at K=5000 in at least 28 of the 30
    preset-times-seed runs."""
    hits, total = 0, 0
    floor_belief = 1.0
    for name in config.PRESET_NAMES:
        cfg = config.load_preset(name)
        theta = stats.objective(cfg.model).theta_star[0]
        for seed in range(5):
            tr = engine.run(cfg.graph, cfg.params, 5000, seed=seed, model=cfg.model)
            min_b = min(
                math.exp(tr.log_mu[5000][i][theta]) for i in range(cfg.graph.n)
            )
            floor_belief = min(floor_belief, min_b)
            hits += min_b > 0.95
            total += 1
    report(hits >= 28, "belief concentration",
           f"{hits}/{total} runs with all agents > 0.95 (need >= 28); "
           f"lowest final belief {floor_belief:.4f}")


# 7. Belief decay rate -------------------------------------------------------

RATE_MODEL_2 = bernoulli_model([0.5, 0.5], [[0.5, 0.5], [0.7, 0.3]])


def test_belief_decay_rate():
    """On a well-specified synchronous coin network (closed-form KLs), the
    endpoint slope of the log belief ratio is within 15% of the predicted
    -(1/n) sum of KLs for at least 4 of 5 seeds."""
    model = RATE_MODEL_2
    g = standard_topology("path", 2)
    sync = schedule.NetworkParams()
    hits = 0
    errors = []
    for seed in range(5):
        tr = engine.run(g, sync, 50_000, seed=seed, model=model)
        est = analysis.estimate_rate(tr, model)
        predicted = est.predicted[(1, 0)]
        rel = abs(est.mean_slope(1, 0) - predicted) / abs(predicted)
        errors.append(rel)
        hits += rel <= 0.15
    report(hits >= 4, "belief decay rate",
           f"{hits}/5 seeds within 15% (rel errors: "
           + ", ".join(f"{e:.3f}" for e in errors) + ")")


# 8. Network independence ----------------------------------------------------

def test_network_independence():
    """The rate estimate depends on the observations, not the graph: with
    identical per-agent observation streams, the slope spread across
    star/path/cycle is smaller than the spread across seeds within any one
    topology."""
    model = bernoulli_model([0.5] * 4, [[0.5] * 4, [0.7, 0.3, 0.7, 0.3]])
    sync = schedule.NetworkParams()
    seeds = (1, 2, 3)
    kinds = ("star", "path", "cycle")
    slope = {}
    for kind in kinds:
        g = standard_topology(kind, 4)
        for seed in seeds:
            tr = engine.run(g, sync, 20_000, seed=seed, model=model)
            est = analysis.estimate_rate(tr, model)
            slope[(kind, seed)] = est.mean_slope(1, 0)
    topo_spread = max(
        max(slope[(k, s)] for k in kinds) - min(slope[(k, s)] for k in kinds)
        for s in seeds
    )
    seed_spread = min(
        max(slope[(k, s)] for s in seeds) - min(slope[(k, s)] for s in seeds)
        for k in kinds
    )
    report(topo_spread < seed_spread, "network independence",
           f"topology spread {topo_spread:.3e} < seed spread {seed_spread:.3e}")


# 9. Schedule validity -------------------------------------------------------

def test_schedule_validity():
    """10^4 generated traces across a parameter grid all satisfy the
    network assumptions; each clause has a hand-built fixture rejected with
    the correct label."""
    rng = np.random.default_rng(99)
    grid = list(
        itertools.product((1, 2, 3), (1, 3, 5), (1, 3, 5), (0.4, 0.8), (0.0, 0.3))
    )
    count = 0
    while count < 10_000:
        l_del, l_u, l_f, p_w, p_l = grid[count % len(grid)]
        params = schedule.NetworkParams(l_del=l_del, l_u=l_u, l_f=l_f, p_w=p_w, p_l=p_l)
        g = random_strongly_connected(rng, int(rng.integers(2, 6)))
        tr = schedule.generate_schedule(params, g, 30, rng)
        assert schedule.validate_schedule(tr, params, g) is None
        count += 1

    g = standard_topology("path", 2)
    wake = np.ones((11, 2), dtype=bool)
    wake[0] = False

    def trace(outcomes):
        return schedule.ScheduleTrace(10, 2, g.edges, wake.copy(), outcomes)

    p = schedule.NetworkParams(l_del=3, l_u=2, l_f=1)
    labels = {}
    labels["b"] = schedule.validate_schedule(
        trace({(0, 1): {1: 5}, (1, 0): {}}), p, g
    )
    over = trace({e: {} for e in g.edges})
    over.wake[3:5, 0] = False
    labels["c"] = schedule.validate_schedule(over, p, g)
    labels["d"] = schedule.validate_schedule(
        trace({(0, 1): {1: None, 2: None}, (1, 0): {}}), p, g
    )
    labels["e"] = schedule.validate_schedule(
        trace({(0, 1): {1: 3, 2: 1}, (1, 0): {}}), p, g
    )
    ok = all(v is not None and v.clause == c for c, v in labels.items())
    report(ok, "schedule validity",
           f"{count} generated traces valid; clause labels "
           + str({c: v.clause if v else None for c, v in labels.items()}))


# 10. Determinism ------------------------------------------------------------

def test_determinism(tmp_path):
    """Repeated runs at a fixed seed produce byte-identical trace CSV and
    report JSON for every preset."""
    identical = True
    for name in config.PRESET_NAMES:
        cfg = config.load_preset(name)
        tree = dict(cfg.raw)
        tree["horizon"] = 200
        cfg = config.build_config(tree, name=name)
        blobs = []
        for rep in ("a", "b"):
            out = tmp_path / name / rep
            rc = cli.run_experiment(cfg, out, quiet=True)
            assert rc == 0
            blobs.append(
                (out / f"{name}_trace.csv").read_bytes()
                + (out / f"{name}_report.json").read_bytes()
            )
        identical &= blobs[0] == blobs[1]
    report(identical, "determinism",
           "byte-identical CSV + JSON across repeated runs for all presets")
