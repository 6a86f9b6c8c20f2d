"""Acceptance gate: nine end-to-end criteria with stated tolerances.

Each test prints a single machine-readable pass/fail line. Heavy artifacts
(the benchmark grid and its converged average-cost solution) are shared
module-wide.
"""
import math
import time

import numpy as np
import pytest

from lossysched import (
    CompiledKernel,
    CovMatrix,
    Order,
    PlantModel,
    build_grid,
    estimate_cost,
    evaluate_policy_cost,
    finite_horizon_dp,
    fit_growth_constants,
    map_region,
    mc_stability_probe,
    probe_oracle,
    psd_order,
    random_psd,
    rolling_horizon_policy,
    rvi,
    solve_are,
    uniform_loss_builder,
    value_iteration,
)
from lossysched.kernel import branches, t_q_mat, xi_mat
from lossysched.riccati import finite_horizon_lqr, pi_tilde_of
from lossysched.stability import Verdict

from .conftest import make_scalar_plant, make_single_state_net

RVI_TOL = 1e-8


def report(capsys, num, label, ok, detail, budget, elapsed):
    with capsys.disabled():
        status = "PASS" if ok and elapsed <= budget else "FAIL"
        print(
            f"[{status}] criterion {num} ({label}): {detail} "
            f"[{elapsed:.1f}s / budget {budget:.0f}s]",
            flush=True,
        )
    assert ok, f"criterion {num} ({label}): {detail}"
    assert elapsed <= budget, f"criterion {num} exceeded budget: {elapsed:.1f}s"


@pytest.fixture(scope="module")
def bench(bench_plant, bench_net):
    """Benchmark grid, converged average-cost solution, compiled kernel."""
    grid = build_grid(bench_plant, bench_net, dedup_tol=1e-3)
    ck = CompiledKernel(grid, bench_plant, bench_net)
    vt = rvi(grid, bench_plant, bench_net, tol=RVI_TOL, compiled=ck)
    sol = solve_are(bench_plant)
    return grid, ck, vt, sol


def test_criterion_1_scalar_critical_rate(probe_plant, capsys):
    """Single sensor, a=2: verdicts across the critical loss rate 0.25."""
    t0 = time.perf_counter()
    builder = uniform_loss_builder(make_single_state_net([0.0]))
    low = mc_stability_probe(probe_plant, builder, [0.15], T=10_000, replications=50)
    high = mc_stability_probe(probe_plant, builder, [0.35], T=10_000, replications=50)
    oracle = probe_oracle(probe_plant, builder, T=4_000, replications=20)
    region = map_region(oracle, [[1.0]], tol=0.02)
    b = region.boundaries[0]
    ok = (
        low.verdict is Verdict.STABLE
        and high.verdict is Verdict.UNSTABLE
        and 0.20 <= b.stable_scale
        and b.unstable_scale <= 0.30
        and not b.undetermined
    )
    detail = (
        f"verdict(0.15)={low.verdict.value}, verdict(0.35)={high.verdict.value}, "
        f"bracket=[{b.stable_scale:.4f}, {b.unstable_scale:.4f}]"
    )
    report(capsys, 1, "scalar critical loss rate", ok, detail, 60, time.perf_counter() - t0)


def test_criterion_2_diagonal_box(diag_plant, capsys):
    """Two equal subsystems: recover the square region corner at 0.25."""
    t0 = time.perf_counter()
    builder = uniform_loss_builder(make_single_state_net([0.0, 0.0]))
    oracle = probe_oracle(diag_plant, builder, T=4_000, replications=20)
    rays = [[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.5], [0.5, 1.0]]
    region = map_region(oracle, rays, tol=0.03)
    deltas = []
    ok = True
    for b in region.boundaries:
        # the box edge along ray d sits at scale 0.25 / max(d)
        edge = 0.25 / float(np.max(b.direction))
        deltas.append((b.stable_scale - edge, b.unstable_scale - edge))
        ok = ok and not b.undetermined
        ok = ok and b.stable_scale <= edge + 0.03 and b.unstable_scale >= edge - 0.03
        ok = ok and (b.unstable_scale - b.stable_scale) <= 0.03 + 1e-9
    detail = "per-ray bracket offsets from the 0.25 edge: " + ", ".join(
        f"[{lo:+.3f},{hi:+.3f}]" for lo, hi in deltas
    )
    report(capsys, 2, "diagonal box region", ok, detail, 600, time.perf_counter() - t0)


def test_criterion_3_riccati_exactness(bench_plant, capsys):
    t0 = time.perf_counter()
    sol = solve_are(bench_plant, alpha=1.0)
    got = float(sol.Pi.entries[0, 0])
    expect = 2.0 + math.sqrt(5.0)
    err = abs(got - expect)
    report(
        capsys,
        3,
        "scalar Riccati closed form",
        err < 1e-9,
        f"Pi={got:.12f}, |err|={err:.2e}",
        1,
        time.perf_counter() - t0,
    )


def test_criterion_4_average_cost_consistency(bench_plant, bench_net, capsys):
    """Simulated closed-loop cost matches rho* + trace(Pi D D^T).

    Uses a wide grid: the stationary covariance distribution has a
    polynomial tail, so rho* on a small-radius grid is biased low by a few
    percent.  Grid size grows only logarithmically in the radius.
    """
    t0 = time.perf_counter()
    grid = build_grid(bench_plant, bench_net, dedup_tol=1e-3, r_max=2e5, max_states=20_000)
    vt = rvi(grid, bench_plant, bench_net, tol=RVI_TOL)
    sol = solve_are(bench_plant)
    j_star = vt.rho_star + float(
        np.trace(sol.Pi.entries @ bench_plant.D @ bench_plant.D.T)
    )
    policy = rolling_horizon_policy(vt)
    mean, stderr, diverged = estimate_cost(
        bench_plant, bench_net, policy, sol.K, horizon=5_000, replications=200, base_seed=0
    )
    z = abs(mean - j_star) / stderr
    ok = diverged == 0 and z <= 3.0
    detail = (
        f"J*={j_star:.4f}, simulated={mean:.4f}+-{stderr:.4f}, "
        f"z={z:.2f}, diverged={diverged}"
    )
    report(capsys, 4, "average-cost consistency", ok, detail, 300, time.perf_counter() - t0)


def test_criterion_5_rvi_vi_identity(bench_plant, bench_net, bench, capsys):
    """Anchored iterates equal plain iterates shifted by the previous anchor."""
    t0 = time.perf_counter()
    grid, ck, vt, sol = bench
    assert len(grid) <= 2000
    cost = ck.cost_matrix(sol.Pi_tilde)
    theta = grid.theta_id
    n_iter = min(vt.iteration_count, 500)
    values, _ = value_iteration(
        grid, bench_plant, bench_net, vt.rho_star, n_iter, compiled=ck
    )
    phi_tilde = np.zeros(len(grid))
    worst = 0.0
    for n in range(1, n_iter + 1):
        bell, _ = ck.bellman(cost, phi_tilde, alpha=1.0)
        phi_tilde = bell - phi_tilde[theta]
        expect = values[n] - values[n - 1][theta] + vt.rho_star
        worst = max(worst, float(np.max(np.abs(phi_tilde - expect))))
    ok = worst <= 10 * RVI_TOL
    detail = f"{n_iter} iterations on {len(grid)} states, max deviation {worst:.2e}"
    report(capsys, 5, "anchored/plain VI identity", ok, detail, 60, time.perf_counter() - t0)


def test_criterion_6_sandwich_and_bracket(bench_plant, bench_net, bench, capsys):
    """Geometric lower bound on iterates and the per-step two-sided bracket."""
    t0 = time.perf_counter()
    grid, ck, vt, sol = bench
    cost = ck.cost_matrix(sol.Pi_tilde)
    f_star = vt.values - float(vt.values.min())  # nonnegative solution
    theta1, theta2 = fit_growth_constants(cost.min(axis=1), f_star)
    rho = 1.0 - theta1
    delta = (vt.rho_star + theta2) / theta1
    n_iter = 80
    values, minimizers = value_iteration(
        grid, bench_plant, bench_net, vt.rho_star, n_iter, compiled=ck
    )
    p_star = ck.policy_kernel(vt.minimizer)
    worst_lower = -np.inf
    worst_bracket = 0.0
    ok = True
    for n in range(n_iter):
        lower = (1.0 - rho**n) * (f_star - delta)
        gap = float(np.max(lower - values[n]))
        worst_lower = max(worst_lower, gap)
        ok = ok and gap <= 1e-6
        # one-step bracket between the stage policy and the optimal policy
        p_n = ck.policy_kernel(minimizers[n])
        diff = values[n] - f_star
        lo = p_n @ diff
        hi = p_star @ diff
        nxt = values[n + 1] - f_star
        viol = max(float(np.max(lo - nxt)), float(np.max(nxt - hi)))
        worst_bracket = max(worst_bracket, viol)
        ok = ok and viol <= 1e-6
    detail = (
        f"theta1={theta1:.3f}, theta2={theta2:.2f}, "
        f"max lower-bound violation {worst_lower:.2e}, "
        f"max bracket violation {worst_bracket:.2e}"
    )
    report(capsys, 6, "sandwich and bracket bounds", ok, detail, 120, time.perf_counter() - t0)


def _random_plant(rng, d=2):
    a = rng.standard_normal((d, d))
    dmat = np.hstack([np.eye(d), np.zeros((d, 1))])
    c = rng.standard_normal((1, d))
    f = np.zeros((1, d + 1))
    f[0, d] = 0.5 + rng.random()
    return PlantModel(
        A=a,
        B=np.eye(d),
        D=dmat,
        R=CovMatrix.identity(d),
        M=CovMatrix.identity(d),
        C=((c,),),
        F=((f,),),
    )


def test_criterion_7_operator_properties(capsys):
    """Monotonicity/concavity, post-update eigenvalue floor, loss ordering."""
    t0 = time.perf_counter()
    failures = []

    rng = np.random.default_rng(100)
    for _ in range(500):
        plant = _random_plant(rng)
        lo = np.asarray(random_psd(rng, 2))
        hi = lo + np.asarray(random_psd(rng, 2))
        slack = 1e-8 * np.eye(2)
        if psd_order(t_q_mat(plant, 0, 0, lo), t_q_mat(plant, 0, 0, hi) + slack) not in (
            Order.LESS_EQ,
            Order.EQUAL,
        ):
            failures.append("monotonicity")
            break

    rng = np.random.default_rng(101)
    for _ in range(500):
        plant = _random_plant(rng)
        s1 = np.asarray(random_psd(rng, 2))
        s2 = np.asarray(random_psd(rng, 2))
        beta = rng.random()
        mix = t_q_mat(plant, 0, 0, (1 - beta) * s1 + beta * s2)
        hull = (1 - beta) * t_q_mat(plant, 0, 0, s1) + beta * t_q_mat(plant, 0, 0, s2)
        if psd_order(hull, mix + 1e-8 * np.eye(2)) not in (Order.LESS_EQ, Order.EQUAL):
            failures.append("concavity")
            break

    # eigenvalue floor: after dim steps every query/reception string from
    # Sigma = 0 is strictly positive definite for a controllable (A, D)
    rng = np.random.default_rng(102)
    floor_seen = np.inf
    for _ in range(500):
        plant = _random_plant(rng)
        worst = np.inf
        for code in range(4):  # single query: reception strings of length 2
            sigma = np.zeros((2, 2))
            c = code
            for _ in range(2):
                sigma = (
                    t_q_mat(plant, 0, 0, sigma) if c % 2 else xi_mat(plant, sigma)
                )
                c //= 2
            worst = min(worst, float(np.linalg.eigvalsh(sigma)[0]))
        floor_seen = min(floor_seen, worst)
        if worst <= 0.0:
            failures.append("eigenvalue floor")
            break

    rng = np.random.default_rng(103)
    for _ in range(500):
        plant = _random_plant(rng)
        lam = rng.random() * 0.8
        lam_hi = lam + rng.random() * (0.99 - lam)
        sigma = CovMatrix(np.asarray(random_psd(rng, 2)))

        def expected_trace(rate):
            net = make_single_state_net([rate])
            return sum(
                b.probability * b.next_cov.trace()
                for b in branches(plant, net, 0, sigma, 0)
            )

        if expected_trace(lam) > expected_trace(lam_hi) + 1e-12:
            failures.append("loss-rate comparison")
            break

    ok = not failures
    detail = (
        f"500 instances per property, min post-update eigenvalue {floor_seen:.3e}"
        if ok
        else f"failed: {failures}"
    )
    report(capsys, 7, "operator property suite", ok, detail, 60, time.perf_counter() - t0)


def test_criterion_8_rolling_horizon(bench_plant, bench_net, bench, capsys):
    """Stage policies approach the optimal average cost as the stage grows."""
    t0 = time.perf_counter()
    grid, ck, vt, sol = bench
    _, minimizers = value_iteration(
        grid, bench_plant, bench_net, vt.rho_star, 20, compiled=ck
    )
    stages = [2, 5, 10, 20]
    costs = []
    for n in stages:
        pol = rolling_horizon_policy(
            type(vt)(grid, np.zeros(len(grid)), minimizers[n - 1], iteration_count=n)
        )
        costs.append(
            evaluate_policy_cost(
                grid, pol, bench_plant, bench_net, horizon=5_000, compiled=ck,
                pi_tilde=sol.Pi_tilde,
            )
        )
    j_conv = evaluate_policy_cost(
        grid,
        rolling_horizon_policy(vt),
        bench_plant,
        bench_net,
        horizon=5_000,
        compiled=ck,
        pi_tilde=sol.Pi_tilde,
    )
    costs.append(j_conv)
    slack = 0.01 * vt.rho_star
    monotone = all(costs[i + 1] <= costs[i] + slack for i in range(len(costs) - 1))
    near = abs(costs[stages.index(20)] - vt.rho_star) <= 0.05 * vt.rho_star
    ok = monotone and near
    detail = (
        "J(n) for n=2,5,10,20,conv: "
        + ", ".join(f"{c:.3f}" for c in costs)
        + f"; rho*={vt.rho_star:.3f}"
    )
    report(capsys, 8, "rolling-horizon near-optimality", ok, detail, 300, time.perf_counter() - t0)


def test_criterion_9_finite_horizon_brute_force(bench_plant, capsys):
    """Backward DP equals direct recursive enumeration on a tiny instance."""
    t0 = time.perf_counter()
    from lossysched import NetworkModel

    p = np.array([[0.7, 0.3], [0.4, 0.6]])
    net = NetworkModel(
        P=(p, p.T.copy() * 0 + 0.5),
        loss=np.array([[0.1, 0.3], [0.2, 0.15]]),
        net_cost=np.array([[0.0, 0.5], [1.0, 0.25]]),
    )
    plant = PlantModel(
        A=bench_plant.A,
        B=bench_plant.B,
        D=bench_plant.D,
        R=bench_plant.R,
        M=bench_plant.M,
        C=tuple((row[0], row[0]) for row in bench_plant.C),
        F=tuple((row[0], row[0]) for row in bench_plant.F),
    )
    grid = build_grid(plant, net, r_max=6.0, dedup_tol=0.3)
    assert len(grid) <= 50
    horizon = 3
    alpha = 1.0
    tables = finite_horizon_dp(grid, plant, net, alpha, horizon, np.zeros((1, 1)))
    pis, _ = finite_horizon_lqr(plant, alpha, horizon, np.zeros((1, 1)))
    weights = [pi_tilde_of(plant, alpha, pis[t].entries) for t in range(horizon)]

    def brute(t, i):
        if t == horizon:
            return 0.0
        s, cov = grid.state(i)
        best = np.inf
        for q in range(2):
            stage = float(net.net_cost[s, q]) + float(
                np.trace(weights[t] @ cov.entries)
            )
            cont = sum(
                b.probability
                * brute(t + 1, grid.project(b.next_net_state, b.next_cov))
                for b in branches(plant, net, s, cov, q)
            )
            best = min(best, stage + alpha * cont)
        return best

    worst = 0.0
    for i in range(len(grid)):
        worst = max(worst, abs(tables[0].values[i] - brute(0, i)))
    ok = worst <= 1e-9
    detail = f"{len(grid)} states, horizon {horizon}, max deviation {worst:.2e}"
    report(capsys, 9, "finite-horizon brute force", ok, detail, 60, time.perf_counter() - t0)
