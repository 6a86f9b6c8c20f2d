"""Closed-loop Monte Carlo: plant + Kalman filter + lossy network + policy.

Random stream discipline: each step draws, in fixed order, the plant noise,
the measurement noise, the network-successor uniform, and the loss uniform.
The fixed order makes coupled comparisons possible: two runs with the same
seed and different loss tables share the loss uniform, so a lower loss rate
can only turn losses into receptions, never the reverse.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .kernel import step_filter
from .psd import CovMatrix, min_eig

DIVERGENCE_TRACE = 1e12
DIVERGENCE_STATE = 1e120


@dataclass
class SimTrace:
    """Per-step record of one closed-loop episode."""

    seed: int
    replication: int = 0
    diverged: bool = False
    x: list = field(default_factory=list)  # plant state, length T+1
    x_hat: list = field(default_factory=list)
    pi_trace: list = field(default_factory=list)  # trace of error covariance
    pi_min_eig: list = field(default_factory=list)
    s: list = field(default_factory=list)  # network state, length T+1
    q: list = field(default_factory=list)  # query, length T
    gamma: list = field(default_factory=list)  # reception flag, length T
    u: list = field(default_factory=list)  # control, length T
    net_cost: list = field(default_factory=list)  # length T
    plant_cost: list = field(default_factory=list)  # length T

    @property
    def steps(self):
        return len(self.q)

    def stage_costs(self):
        return np.asarray(self.net_cost) + np.asarray(self.plant_cost)

    def average_cost(self):
        return float(np.mean(self.stage_costs())) if self.steps else float("nan")


def _rng_from(seed):
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(seed))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def run_episode(
    plant,
    net,
    policy,
    gain,
    horizon,
    seed,
    x0=None,
    sigma0=None,
    s0=None,
    replication=0,
) -> SimTrace:
    """Simulate one episode of `horizon` steps.

    `policy` maps (net state, covariance) to a query; `gain` is the
    feedback matrix K in u = -K x_hat.  Unstable runs set the diverged
    flag and stop early rather than raising.
    """
    rng = _rng_from(seed)
    d, d_u, d_w = plant.dim, plant.dim_u, plant.dim_w
    K = np.asarray(gain, dtype=float).reshape(d_u, d)
    s = net.s_circ if s0 is None else int(s0)
    sigma0 = CovMatrix.zero(d) if sigma0 is None else sigma0
    x_mean = np.zeros(d) if x0 is None else np.asarray(x0, dtype=float)
    cov0 = np.asarray(sigma0, dtype=float)
    if np.any(cov0):
        x = rng.multivariate_normal(x_mean, cov0)
    else:
        x = x_mean.copy()
    x_hat = x_mean.copy()
    pi_hat = sigma0 if isinstance(sigma0, CovMatrix) else CovMatrix(cov0)

    if hasattr(policy, "reset"):
        policy.reset()

    seed_val = seed.entropy if isinstance(seed, np.random.SeedSequence) else seed
    trace = SimTrace(seed=seed_val, replication=replication)
    trace.x.append(x.copy())
    trace.x_hat.append(x_hat.copy())
    trace.pi_trace.append(pi_hat.trace())
    trace.pi_min_eig.append(min_eig(pi_hat))
    trace.s.append(s)

    R, M = plant.R.entries, plant.M.entries
    for _ in range(horizon):
        q = int(policy(s, pi_hat))
        u = -K @ x_hat
        trace.q.append(q)
        trace.u.append(u.copy())
        trace.net_cost.append(float(net.net_cost[s, q]))
        trace.plant_cost.append(float(x @ R @ x + u @ M @ u))

        w = rng.standard_normal(d_w)
        v = rng.standard_normal(d_w)
        u_net = rng.random()
        u_loss = rng.random()

        x = plant.A @ x + plant.B @ u + plant.D @ w
        cum = np.cumsum(net.P[q][s])
        s_next = int(np.searchsorted(cum, u_net, side="right"))
        s_next = min(s_next, net.num_states - 1)
        gamma = u_loss >= float(net.loss[s, q])
        if gamma:
            y = plant.C[q][s] @ x + plant.F[q][s] @ v
            x_hat, pi_hat = step_filter(plant, net, q, s, x_hat, pi_hat, u, 1, y)
        else:
            x_hat, pi_hat = step_filter(plant, net, q, s, x_hat, pi_hat, u, 0)
        s = s_next

        trace.gamma.append(int(gamma))
        trace.x.append(x.copy())
        trace.x_hat.append(x_hat.copy())
        trace.pi_trace.append(pi_hat.trace())
        trace.pi_min_eig.append(min_eig(pi_hat))
        trace.s.append(s)

        if (
            pi_hat.trace() > DIVERGENCE_TRACE
            or not np.all(np.isfinite(x))
            or np.max(np.abs(x)) > DIVERGENCE_STATE
        ):
            trace.diverged = True
            break
    return trace


def estimate_cost(plant, net, policy, gain, horizon, replications, base_seed):
    """Mean and standard error of the time-averaged episode cost.

    Episodes use independent seeded generators spawned from the base
    seed, so the result is bit-for-bit reproducible.  Diverged episodes
    are excluded from the mean and reported in the count.
    """
    if replications < 2:
        raise ValueError("need at least 2 replications")
    seeds = np.random.SeedSequence(base_seed).spawn(replications)
    costs = []
    diverged = 0
    for rep, ss in enumerate(seeds):
        trace = run_episode(
            plant, net, policy, gain, horizon, ss, replication=rep
        )
        if trace.diverged:
            diverged += 1
        else:
            costs.append(trace.average_cost())
    costs = np.asarray(costs)
    if len(costs) == 0:
        return float("nan"), float("nan"), diverged
    mean = float(np.mean(costs))
    stderr = float(np.std(costs, ddof=1) / np.sqrt(len(costs))) if len(costs) > 1 else float("nan")
    return mean, stderr, diverged


class LossRateEstimator:
    """Empirical per-(state, query) loss rates with a Jeffreys-style prior.

    Each pair starts with pseudo-counts of half a loss and half a success,
    so unvisited pairs report 0.5 and estimates converge a.s. to the true
    rate for pairs attempted infinitely often.
    """

    def __init__(self, num_states, num_queries):
        self.attempts = np.zeros((num_states, num_queries), dtype=int)
        self.losses = np.zeros((num_states, num_queries), dtype=int)

    def update(self, s, q, gamma):
        self.attempts[s, q] += 1
        if not gamma:
            self.losses[s, q] += 1

    @property
    def lambda_hat(self):
        return (self.losses + 0.5) / (self.attempts + 1.0)

    @property
    def visited(self):
        return self.attempts > 0


def online_loss_estimator(stream, num_states, num_queries) -> LossRateEstimator:
    """Consume (s, q, gamma) triples into a LossRateEstimator."""
    est = LossRateEstimator(num_states, num_queries)
    for s, q, gamma in stream:
        est.update(int(s), int(q), bool(gamma))
    return est


class RoundRobinPolicy:
    """Cycles through the queries; ignores the state.  Baseline policy."""

    def __init__(self, num_queries):
        self.num_queries = num_queries
        self._next = 0

    def reset(self):
        self._next = 0

    def __call__(self, s, sigma):
        q = self._next
        self._next = (self._next + 1) % self.num_queries
        return q


def trace_rows(trace: SimTrace):
    """Per-step dict rows (shared by the JSONL and CSV writers)."""
    for t in range(trace.steps):
        yield {
            "t": t,
            "s": trace.s[t],
            "q": trace.q[t],
            "gamma": trace.gamma[t],
            "x": np.asarray(trace.x[t]).tolist(),
            "x_hat": np.asarray(trace.x_hat[t]).tolist(),
            "u": np.asarray(trace.u[t]).tolist(),
            "pi_trace": trace.pi_trace[t],
            "pi_min_eig": trace.pi_min_eig[t],
            "net_cost": trace.net_cost[t],
            "plant_cost": trace.plant_cost[t],
        }


def write_trace_jsonl(trace: SimTrace, path):
    with open(path, "w") as fh:
        for row in trace_rows(trace):
            fh.write(json.dumps(row) + "\n")


def write_trace_csv(trace: SimTrace, path):
    rows = list(trace_rows(trace))
    if not rows:
        open(path, "w").close()
        return
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        for row in rows:
            row = dict(row)
            for key in ("x", "x_hat", "u"):
                row[key] = ";".join(f"{v:.17g}" for v in row[key])
            writer.writerow(row)
