#!/usr/bin/env python3
"""Convergence of rolling-horizon scheduling policies to the optimum.

Extracts the stage-n minimizer from value iteration for several n, scores
each as a stationary policy by exact expected average cost on the
projected chain, and reports the gap to the converged optimum.
"""
import argparse

import numpy as np

from lossysched import (
    CompiledKernel,
    build_grid,
    evaluate_policy_cost,
    rolling_horizon_policy,
    rvi,
    solve_are,
    value_iteration,
)
from lossysched.mdp import ValueTable

import _models


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--stages", type=int, nargs="+", default=[1, 2, 5, 10, 20, 50])
    ap.add_argument("--horizon", type=int, default=5000)
    ap.add_argument("--dedup", type=float, default=1e-3)
    args = ap.parse_args()

    plant, net = _models.scalar_two_sensor_benchmark()
    grid = build_grid(plant, net, dedup_tol=args.dedup)
    ck = CompiledKernel(grid, plant, net)
    vt = rvi(grid, plant, net, tol=1e-8, compiled=ck)
    pi_tilde = solve_are(plant).Pi_tilde
    print(f"grid: {len(grid)} states; rho* = {vt.rho_star:.6f}")

    n_max = max(args.stages)
    _, minimizers = value_iteration(
        grid, plant, net, vt.rho_star, n_max, compiled=ck
    )
    print(f"{'stage':>6}  {'avg cost':>10}  {'gap vs rho*':>12}  {'disagreements':>14}")
    for n in args.stages:
        stage_vt = ValueTable(
            grid, np.zeros(len(grid)), minimizers[n - 1], iteration_count=n
        )
        cost = evaluate_policy_cost(
            grid,
            rolling_horizon_policy(stage_vt),
            plant,
            net,
            horizon=args.horizon,
            compiled=ck,
            pi_tilde=pi_tilde,
        )
        dis = int(np.sum(minimizers[n - 1] != vt.minimizer))
        print(f"{n:>6}  {cost:>10.4f}  {cost - vt.rho_star:>12.4f}  {dis:>14}")

    conv = evaluate_policy_cost(
        grid,
        rolling_horizon_policy(vt),
        plant,
        net,
        horizon=args.horizon,
        compiled=ck,
        pi_tilde=pi_tilde,
    )
    print(f"{'conv':>6}  {conv:>10.4f}  {conv - vt.rho_star:>12.4f}  {0:>14}")


if __name__ == "__main__":
    main()
