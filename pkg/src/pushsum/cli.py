"""Experiment runner: single runs, the six shipped presets, and sweeps.

Exit codes: 0 all enabled checks pass, 1 check failure, 2 config error,
3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import analysis, engine, stats
from .config import PRESET_NAMES, ExperimentConfig, load_config_file, load_preset
from .errors import ConfigError, PushSumError, RunError, WindowTooShortError


def mass_tolerance(n: int, horizon: int) -> float:
    # Cumulative sums grow linearly with the horizon, so the float error in
    # the pending-mass cancellation grows with it too.
    return 1e-12 * n if horizon <= 1000 else 1e-9


def concentration_tick(trace: engine.BeliefTrace, theta: int, threshold: float = 0.95):
    """First tick after which every agent's belief on theta stays above the
    threshold; None if that never happens."""
    log_thr = math.log(threshold)
    last_bad = 0
    for k in range(1, trace.horizon + 1):
        if any(trace.log_mu[k][i][theta] <= log_thr for i in range(trace.n)):
            last_bad = k
    if last_bad == trace.horizon:
        return None
    return last_bad + 1


def _normalization_error(trace: engine.BeliefTrace) -> float:
    worst = 0.0
    for k in range(trace.horizon + 1):
        for i in range(trace.n):
            worst = max(worst, abs(sum(trace.beliefs(k, i)) - 1.0))
    return worst


def run_experiment(cfg: ExperimentConfig, out_dir: Path, quiet: bool = False) -> int:
    """Execute one configured run; write the trace CSV and report JSON."""
    out_dir.mkdir(parents=True, exist_ok=True)
    constants = analysis.contraction_constants(
        cfg.graph.n, cfg.params.l_del, cfg.params.l_u, cfg.params.l_f
    )
    report: dict = {
        "name": cfg.name,
        "config": cfg.raw,
        "seed": cfg.seed,
        "mode": cfg.mode,
        "horizon": cfg.horizon,
        "constants": {
            "l_s": constants.l_s,
            "log_alpha": constants.log_alpha,
            "log_lambda": constants.log_lambda,
            "delta": float(constants.delta),
        },
    }
    checks = []
    if cfg.mode == "raps":
        trace = engine.run(
            cfg.graph,
            cfg.params,
            cfg.horizon,
            seed=cfg.seed,
            kind="raps",
            x0=list(cfg.raps_x0),
        )
        decay = analysis.check_raps_decay(trace, constants)
        report["raps"] = {
            "final_z": trace.z[-1],
            "bound_satisfied": decay.bound_satisfied,
            "empirical_rate": decay.empirical_rate,
        }
        checks.append(("raps_bound", decay.bound_satisfied))
    else:
        audit_mode = cfg.mode == "audit"
        trace = engine.run(
            cfg.graph,
            cfg.params,
            cfg.horizon,
            seed=cfg.seed,
            kind="learning",
            model=cfg.model,
            record_history=audit_mode,
        )
        obj = stats.objective(cfg.model)
        report["objective"] = {
            "f_values": list(obj.f_values),
            "theta_star": list(obj.theta_star),
            "gap": obj.gap,
        }
        report["final_beliefs"] = [
            trace.beliefs(cfg.horizon, i) for i in range(cfg.graph.n)
        ]
        report["concentration_tick"] = concentration_tick(trace, obj.theta_star[0])
        norm_err = _normalization_error(trace)
        report["normalization"] = {"max_error": norm_err, "pass": norm_err <= 1e-9}
        checks.append(("normalization", norm_err <= 1e-9))
        try:
            rate = analysis.estimate_rate(trace, cfg.model)
            report["rate_estimate"] = {
                "slopes": {
                    f"agent{a}:theta{v}vs{w}": s
                    for (a, v, w), s in sorted(rate.slopes.items())
                },
                "predicted": {
                    f"theta{v}vs{w}": p for (v, w), p in sorted(rate.predicted.items())
                },
                "bound": rate.bound,
            }
        except WindowTooShortError as exc:
            report["rate_estimate"] = None
            report["rate_estimate_skipped"] = str(exc)
        if audit_mode:
            theta_w = obj.theta_star[0]
            residuals = {}
            for theta_v in range(cfg.model.m):
                if theta_v in obj.theta_star:
                    continue
                rep = analysis.audit_recursions(
                    trace,
                    trace.schedule,
                    cfg.graph,
                    cfg.model,
                    theta_v,
                    theta_w,
                    l_d=cfg.params.effective_delay_bound,
                )
                residuals[f"theta{theta_v}vs{theta_w}"] = rep.residuals
                checks.append((f"recursion_audit_theta{theta_v}", rep.max_residual <= 1e-9))
            report["recursion_audit"] = residuals

    tol = mass_tolerance(cfg.graph.n, cfg.horizon)
    max_res = trace.max_mass_residual()
    report["mass_audit"] = {
        "max_residual": max_res,
        "tolerance": tol,
        "pass": max_res <= tol,
    }
    report["stale_drops"] = trace.stale_drops
    checks.append(("mass_audit", max_res <= tol))
    passed = all(ok for _, ok in checks)
    report["checks"] = {name: ok for name, ok in checks}
    report["checks_passed"] = passed

    csv_path = out_dir / f"{cfg.name}_trace.csv"
    csv_path.write_text(trace.to_csv())
    report_path = out_dir / f"{cfg.name}_report.json"
    report_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not quiet:
        status = "PASS" if passed else "FAIL"
        print(f"{cfg.name}: {status}  (csv: {csv_path}, report: {report_path})")
        for name, ok in checks:
            print(f"  {name}: {'ok' if ok else 'FAILED'}")
    return 0 if passed else 1


def _apply_overrides(
    cfg: ExperimentConfig, args, base_dir: Path | None = None
) -> ExperimentConfig:
    from .config import build_config

    tree = dict(cfg.raw)
    if args.seed is not None:
        tree["seed"] = args.seed
    if args.horizon is not None:
        tree["horizon"] = args.horizon
    if args.mode is not None:
        tree["mode"] = args.mode
    if getattr(args, "audit", False):
        tree["mode"] = "audit"
    return build_config(tree, name=cfg.name, base_dir=base_dir)


def _sweep_cell(preset: str, seed: int, horizon: int | None) -> dict:
    cfg = load_preset(preset)
    tree = dict(cfg.raw)
    tree["seed"] = seed
    if horizon is not None:
        tree["horizon"] = horizon
    from .config import build_config

    cfg = build_config(tree, name=preset)
    trace = engine.run(
        cfg.graph,
        cfg.params,
        cfg.horizon,
        seed=cfg.seed,
        kind="learning",
        model=cfg.model,
    )
    obj = stats.objective(cfg.model)
    theta = obj.theta_star[0]
    final_min = min(
        math.exp(trace.log_mu[cfg.horizon][i][theta]) for i in range(cfg.graph.n)
    )
    return {
        "preset": preset,
        "seed": seed,
        "horizon": cfg.horizon,
        "theta_star": theta,
        "concentration_tick": concentration_tick(trace, theta),
        "final_min_belief": final_min,
        "max_mass_residual": trace.max_mass_residual(),
        "stale_drops": trace.stale_drops,
    }


def run_sweep(
    presets: list[str],
    seeds: list[int],
    horizon: int | None,
    out_dir: Path,
    jobs: int = 1,
    quiet: bool = False,
) -> int:
    if not seeds:
        raise ConfigError("seeds: empty sweep")
    for p in presets:
        if p not in PRESET_NAMES:
            raise ConfigError(f"unknown preset {p!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    cells = [(p, s) for p in presets for s in seeds]
    if jobs > 1:
        cell_presets, cell_seeds = zip(*cells)
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(
                pool.map(_sweep_cell, cell_presets, cell_seeds, [horizon] * len(cells))
            )
    else:
        results = [_sweep_cell(p, s, horizon) for p, s in cells]
    report = {
        "presets": presets,
        "seeds": seeds,
        "cells": results,
        "all_concentrated": all(r["concentration_tick"] is not None for r in results),
    }
    path = out_dir / "sweep_report.json"
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if not quiet:
        for r in results:
            print(
                f"{r['preset']} seed={r['seed']}: concentration_tick="
                f"{r['concentration_tick']} final_min_belief={r['final_min_belief']:.4f}"
            )
        print(f"sweep report: {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pushsum", description="Asynchronous push-sum learning simulator"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    src = p_run.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="path to a YAML experiment config")
    src.add_argument("--preset", choices=PRESET_NAMES, help="shipped preset name")
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--horizon", type=int, default=None)
    p_run.add_argument("--mode", choices=("learning", "raps", "audit"), default=None)
    p_run.add_argument("--out-dir", default="out")
    p_run.add_argument(
        "--audit", action="store_true", help="retain history and audit the run"
    )
    p_run.add_argument("--quiet", action="store_true")

    p_sweep = sub.add_parser("sweep", help="run a preset grid across seeds")
    p_sweep.add_argument(
        "--presets", default=",".join(PRESET_NAMES), help="comma-separated preset names"
    )
    p_sweep.add_argument("--seeds", required=True, help="comma-separated seeds")
    p_sweep.add_argument("--horizon", type=int, default=None)
    p_sweep.add_argument("--out-dir", default="out")
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.add_argument("--quiet", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            if args.preset:
                cfg = load_preset(args.preset)
                base_dir = None
            else:
                cfg = load_config_file(args.config)
                base_dir = Path(args.config).parent
            cfg = _apply_overrides(cfg, args, base_dir=base_dir)
            return run_experiment(cfg, Path(args.out_dir), quiet=args.quiet)
        seeds = [int(s) for s in args.seeds.split(",") if s.strip()]
        presets = [p.strip() for p in args.presets.split(",") if p.strip()]
        return run_sweep(
            presets, seeds, args.horizon, Path(args.out_dir), jobs=args.jobs,
            quiet=args.quiet,
        )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RunError, PushSumError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
