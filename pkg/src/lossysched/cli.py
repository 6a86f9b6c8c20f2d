"""Command-line front end: riccati, solve, finite, simulate, region, validate.

Exit codes form a stable scripting contract:

* 0 — success,
* 1 — configuration or input error,
* 2 — a solver failed to converge numerically,
* 3 — the model looks unstabilizable (average-cost iteration diverged or a
  minorization certificate failed where one is required).

All artifacts are JSON (values, policies, Riccati solutions), with CSV/JSONL
for bulk traces and region sweeps, so results diff cleanly and reload exactly.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .config import ModelConfig, load_config
from .errors import ConfigError, ConvergenceError, LossySchedError, PossiblyUnstableError
from .mdp import (
    CompiledKernel,
    SchedulingPolicy,
    StateGrid,
    ValueTable,
    build_grid,
    discounted_vi,
    finite_horizon_dp,
    rolling_horizon_policy,
    rvi,
)
from .model import validate
from .psd import CovMatrix
from .riccati import RiccatiSolution, solve_are
from .sim import RoundRobinPolicy, estimate_cost, run_episode, write_trace_csv, write_trace_jsonl
from .stability import (
    greedy_policy,
    map_region,
    probe_oracle,
    region_to_csv,
    uniform_loss_builder,
)


# ---------------------------------------------------------------------------
# JSON artifact round trips
# ---------------------------------------------------------------------------


def riccati_to_dict(sol: RiccatiSolution) -> dict:
    return {
        "Pi": np.asarray(sol.Pi).tolist(),
        "Pi_tilde": np.asarray(sol.Pi_tilde).tolist(),
        "K": np.asarray(sol.K).tolist(),
        "alpha": sol.alpha,
        "iterations": sol.iterations,
        "residual": sol.residual,
    }


def grid_to_dict(grid: StateGrid) -> dict:
    return {
        "net_states": grid.net_states.tolist(),
        "covs": [c.entries.tolist() for c in grid.covs],
        "r_max": grid.r_max,
        "dedup_tol": grid.dedup_tol,
        "theta_id": grid.theta_id,
        "num_net_states": grid.num_net_states,
    }


def grid_from_dict(doc: dict) -> StateGrid:
    grid = StateGrid(
        net_states=np.asarray(doc["net_states"], dtype=np.int64),
        covs=[CovMatrix(np.asarray(c, dtype=float)) for c in doc["covs"]],
        r_max=float(doc["r_max"]),
        dedup_tol=float(doc["dedup_tol"]),
        theta_id=int(doc["theta_id"]),
        num_net_states=int(doc["num_net_states"]),
    )
    grid.finalize()
    return grid


def value_table_to_dict(vt: ValueTable, mode: str) -> dict:
    return {
        "mode": mode,
        "alpha": vt.alpha,
        "rho_star": vt.rho_star,
        "iterations": vt.iteration_count,
        "span_residual": vt.span_residual,
        "values": vt.values.tolist(),
        "minimizer": np.asarray(vt.minimizer, dtype=int).tolist(),
        "grid": grid_to_dict(vt.grid),
    }


def value_table_from_dict(doc: dict) -> ValueTable:
    return ValueTable(
        grid=grid_from_dict(doc["grid"]),
        values=np.asarray(doc["values"], dtype=float),
        minimizer=np.asarray(doc["minimizer"], dtype=np.int64),
        alpha=float(doc["alpha"]),
        rho_star=float(doc["rho_star"]),
        iteration_count=int(doc["iterations"]),
        span_residual=float(doc["span_residual"]),
    )


def _emit(doc: dict, out: str | None) -> None:
    text = json.dumps(doc, indent=2, allow_nan=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _solve_grid(cfg: ModelConfig) -> StateGrid:
    return build_grid(
        cfg.plant,
        cfg.net,
        r_max=cfg.solver.r_max,
        max_states=cfg.solver.max_states,
        dedup_tol=cfg.solver.dedup_tol,
    )


def cmd_riccati(args) -> int:
    cfg = load_config(args.config)
    alpha = args.alpha if args.alpha is not None else cfg.solver.alpha
    sol = solve_are(cfg.plant, alpha=alpha)
    _emit(riccati_to_dict(sol), args.out)
    return 0


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    grid = _solve_grid(cfg)
    if args.mode == "average":
        vt = rvi(grid, cfg.plant, cfg.net, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)
        print(f"rho_star = {vt.rho_star:.12g}")
        _emit(value_table_to_dict(vt, "average"), args.out)
    elif args.mode == "discounted":
        alpha = args.alpha if args.alpha is not None else cfg.solver.alpha
        vt = discounted_vi(
            grid, cfg.plant, cfg.net, alpha, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter
        )
        _emit(value_table_to_dict(vt, "discounted"), args.out)
    else:  # finite
        if args.n is None:
            raise ConfigError("--n is required for finite-horizon mode")
        alpha = args.alpha if args.alpha is not None else cfg.solver.alpha
        tables = finite_horizon_dp(
            grid, cfg.plant, cfg.net, alpha, args.n, CovMatrix.zero(cfg.plant.dim)
        )
        _emit(
            {
                "mode": "finite",
                "horizon": args.n,
                "stages": [value_table_to_dict(vt, "finite") for vt in tables],
            },
            args.out,
        )
    return 0


def cmd_finite(args) -> int:
    args.mode = "finite"
    if not hasattr(args, "alpha") or args.alpha is None:
        args.alpha = None
    return cmd_solve(args)


def _build_policy(cfg: ModelConfig, name: str):
    if name == "optimal":
        grid = _solve_grid(cfg)
        vt = rvi(grid, cfg.plant, cfg.net, tol=cfg.solver.tol, max_iter=cfg.solver.max_iter)
        return rolling_horizon_policy(vt)
    if name == "greedy":
        return greedy_policy(cfg.plant, cfg.net)
    if name == "round-robin":
        return RoundRobinPolicy(cfg.plant.num_queries)
    if name.startswith("fixed:"):
        q = int(name.split(":", 1)[1])
        if not 0 <= q < cfg.plant.num_queries:
            raise ConfigError(f"fixed query {q} out of range")
        return lambda s, sigma: q
    if name.endswith(".json"):
        with open(name) as fh:
            doc = json.load(fh)
        vt = value_table_from_dict(doc)
        return SchedulingPolicy(grid=vt.grid, table=np.asarray(vt.minimizer, dtype=int))
    raise ConfigError(
        f"unknown policy {name!r}; expected optimal, greedy, round-robin, "
        "fixed:<q>, or a value-table JSON path"
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    policy = _build_policy(cfg, args.policy)
    gain = solve_are(cfg.plant).K
    horizon = args.T if args.T is not None else cfg.sim.T
    replications = (
        args.replications if args.replications is not None else cfg.sim.replications
    )
    seed = args.seed if args.seed is not None else cfg.sim.base_seed
    print(f"base_seed = {seed}")

    if args.jsonl or args.csv:
        trace = run_episode(cfg.plant, cfg.net, policy, gain, horizon, seed)
        if args.jsonl:
            write_trace_jsonl(trace, args.jsonl)
        if args.csv:
            write_trace_csv(trace, args.csv)

    mean, stderr, diverged = estimate_cost(
        cfg.plant, cfg.net, policy, gain, horizon, replications, seed
    )
    _emit(
        {
            "policy": args.policy,
            "T": horizon,
            "replications": replications,
            "base_seed": seed,
            "mean_cost": mean,
            "stderr": stderr,
            "diverged": diverged,
        },
        args.out,
    )
    return 0


def _default_rays(num_queries: int, k: int) -> list:
    if num_queries == 2:
        angles = np.linspace(0.0, np.pi / 2.0, k)
        return [np.array([np.cos(t), np.sin(t)]) for t in angles]
    rays = [np.eye(num_queries)[i] for i in range(num_queries)]
    rays.append(np.ones(num_queries) / np.sqrt(num_queries))
    rng = np.random.default_rng(0)
    while len(rays) < k:
        rays.append(rng.dirichlet(np.ones(num_queries)))
    return rays[:k]


def cmd_region(args) -> int:
    cfg = load_config(args.config)
    seed = args.seed if args.seed is not None else cfg.solver.seed
    print(f"seed = {seed}")
    oracle = probe_oracle(
        cfg.plant,
        uniform_loss_builder(cfg.net),
        policy="greedy",
        T=args.T,
        replications=args.replications,
        seed=seed,
    )
    rays = _default_rays(cfg.plant.num_queries, args.rays)
    region = map_region(oracle, rays, tol=args.tol)
    region_to_csv(region, args.out)
    for b in region.boundaries:
        direction = ", ".join(f"{x:.4g}" for x in b.direction)
        flags = "saturated" if b.saturated else ("undetermined" if b.undetermined else "")
        print(
            f"ray ({direction}): stable up to {b.stable_scale:.6g}, "
            f"unstable from {b.unstable_scale:.6g} {flags}".rstrip()
        )
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)  # parse errors surface as exit 1
    report = validate(cfg.plant, cfg.net)
    print(f"ok: {report.ok}")
    for err in report.errors:
        print(f"error: {err}")
    for warning in report.warnings:
        print(f"warning: {warning}")
    if report.minorization is not None and report.minorization.success:
        print(f"minorization theta = {report.minorization.theta:.6g}")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lossysched",
        description="Optimal sensor scheduling over a dynamic lossy network",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("riccati", help="solve the control Riccati equation")
    p.add_argument("config")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_riccati)

    p = sub.add_parser("solve", help="solve the scheduling DP on the covariance grid")
    p.add_argument("config")
    p.add_argument("--mode", choices=["average", "discounted", "finite"], default="average")
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="horizon for finite mode")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("finite", help="finite-horizon DP (solve --mode finite)")
    p.add_argument("config")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_finite)

    p = sub.add_parser("simulate", help="closed-loop Monte Carlo under a policy")
    p.add_argument("config")
    p.add_argument("--policy", default="optimal")
    p.add_argument("--T", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jsonl", default=None)
    p.add_argument("--csv", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("region", help="map the stabilizable loss-rate region")
    p.add_argument("config")
    p.add_argument("--rays", type=int, default=5)
    p.add_argument("--tol", type=float, default=0.01)
    p.add_argument("--T", type=int, default=4_000)
    p.add_argument("--replications", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("validate", help="check a model config against assumptions")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except PossiblyUnstableError as exc:
        print(f"possibly unstable: {exc}", file=sys.stderr)
        return 3
    except ConvergenceError as exc:
        print(f"did not converge: {exc}", file=sys.stderr)
        return 2
    except (OSError, json.JSONDecodeError, LossySchedError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
