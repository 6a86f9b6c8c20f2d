"""Finite approximation of the scheduling MDP and its DP solvers.

The continuous component of the state space (the PSD cone) is finitized by
closing the seed covariances under the exact kernel branch maps, truncated
at a trace radius.  DP backups therefore use true successor states; the
only approximation is the projection applied at the trace boundary (and
the dedup merge tolerance).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse

from .errors import ConvergenceError, GridOverflowError, PossiblyUnstableError
from .kernel import PRUNE_TOL, t_q_mat, xi_mat
from .model import check_minorization
from .psd import CovMatrix, as_matrix
from .riccati import pi_tilde_of, solve_are

DEFAULT_DEDUP_TOL = 1e-9
DEFAULT_MAX_STATES = 20_000


@dataclass
class StateGrid:
    """Ordered finite subset of (net-state, covariance) pairs.

    Stores, per network state, a stacked array of the covariances for
    vectorized nearest-neighbor projection.  The reference state
    theta = (s_circ, 0) is always present.
    """

    net_states: np.ndarray  # (n,) int
    covs: list  # list[CovMatrix], length n
    r_max: float
    dedup_tol: float
    theta_id: int
    num_net_states: int
    _ids_by_s: list = field(repr=False, default_factory=list)  # list[np.ndarray]
    _stack_by_s: list = field(repr=False, default_factory=list)  # list[(k,d,d) array]

    def __len__(self):
        return len(self.covs)

    @property
    def dim(self):
        return self.covs[0].dim

    def state(self, i):
        return int(self.net_states[i]), self.covs[i]

    def finalize(self):
        n_s = self.num_net_states
        d = self.dim
        self._ids_by_s = []
        self._stack_by_s = []
        for s in range(n_s):
            ids = np.nonzero(self.net_states == s)[0]
            self._ids_by_s.append(ids)
            if len(ids):
                stack = np.stack([self.covs[i].entries for i in ids])
            else:
                stack = np.zeros((0, d, d))
            self._stack_by_s.append(stack)

    def project(self, s, sigma):
        """Grid id of the nearest stored covariance with net state s.

        Nearest in Frobenius norm; ties break to the lower grid id.  This
        is the sole approximation applied to off-grid states.
        """
        target = as_matrix(sigma)
        stack = self._stack_by_s[s]
        if stack.shape[0] == 0:
            raise ValueError(f"no grid states with net state {s}")
        dists = np.linalg.norm(
            stack.reshape(stack.shape[0], -1) - target.reshape(-1), axis=1
        )
        return int(self._ids_by_s[s][int(np.argmin(dists))])

    def lookup(self, s, sigma, tol=None):
        """Grid id of an existing state within tol, or None."""
        tol = self.dedup_tol if tol is None else tol
        stack = self._stack_by_s[s]
        if stack.shape[0] == 0:
            return None
        target = as_matrix(sigma)
        dists = np.linalg.norm(
            stack.reshape(stack.shape[0], -1) - target.reshape(-1), axis=1
        )
        j = int(np.argmin(dists))
        if dists[j] <= tol:
            return int(self._ids_by_s[s][j])
        return None


def default_r_max(plant, net, factor=50.0, max_iter=10_000, tol=1e-12):
    """Trace radius: factor times the best single-sensor fixed point.

    For each query, iterate the received-branch update from 0 at the
    reference network state until it settles, and take the smallest
    resulting trace.  Falls back to the last iterate if a query's update
    does not settle (that query is then simply not the best one).
    """
    best = np.inf
    s = net.s_circ
    for q in range(net.num_queries):
        sig = np.zeros((plant.dim, plant.dim))
        for _ in range(max_iter):
            nxt = t_q_mat(plant, q, s, sig)
            if np.max(np.abs(nxt - sig)) <= tol * (1.0 + np.max(np.abs(nxt))):
                sig = nxt
                break
            sig = nxt
        best = min(best, float(np.trace(sig)))
    return factor * max(best, float(np.trace(plant.D @ plant.D.T)))


def build_grid(
    plant,
    net,
    seeds=(),
    r_max=None,
    max_states=DEFAULT_MAX_STATES,
    dedup_tol=DEFAULT_DEDUP_TOL,
) -> StateGrid:
    """Breadth-first closure of the seeds under the kernel branch maps.

    The zero covariance is always a seed, paired with every network
    state.  Successors with trace beyond r_max are not stored (boundary
    projection handles them during backups).  Raises GridOverflowError if
    the budget is exhausted while unexplored sub-r_max states remain.
    """
    if r_max is None:
        r_max = default_r_max(plant, net)
    d = plant.dim
    N = net.num_states

    seed_covs = [CovMatrix.zero(d)]
    for s0 in seeds:
        cm = s0 if isinstance(s0, CovMatrix) else CovMatrix(np.asarray(s0, float))
        seed_covs.append(cm)

    net_states: list[int] = []
    covs: list[CovMatrix] = []
    stacks = [np.zeros((0, d * d)) for _ in range(N)]
    ids_by_s: list[list[int]] = [[] for _ in range(N)]

    def find(s, mat):
        flat = mat.reshape(-1)
        st = stacks[s]
        if st.shape[0] == 0:
            return None
        dists = np.linalg.norm(st - flat, axis=1)
        j = int(np.argmin(dists))
        return ids_by_s[s][j] if dists[j] <= dedup_tol else None

    def add(s, cov):
        i = len(covs)
        net_states.append(s)
        covs.append(cov)
        stacks[s] = np.vstack([stacks[s], cov.entries.reshape(1, -1)])
        ids_by_s[s].append(i)
        return i

    queue = []
    for s in range(N):
        for cov in seed_covs:
            if cov.trace() > r_max:
                continue
            if find(s, cov.entries) is None:
                queue.append(add(s, cov))

    head = 0
    while head < len(queue):
        i = queue[head]
        head += 1
        s = net_states[i]
        sigma = covs[i].entries
        for q in range(net.num_queries):
            lam = float(net.loss[s, q])
            succ_covs = []
            if 1.0 - lam >= PRUNE_TOL:
                succ_covs.append(t_q_mat(plant, q, s, sigma))
            if lam >= PRUNE_TOL:
                succ_covs.append(xi_mat(plant, sigma))
            row = net.P[q][s]
            next_states = np.nonzero(row >= PRUNE_TOL)[0]
            for mat in succ_covs:
                if float(np.trace(mat)) > r_max:
                    continue
                cov = None
                for s_next in next_states:
                    if find(int(s_next), mat) is None:
                        if len(covs) >= max_states:
                            raise GridOverflowError(
                                f"grid closure needs more than {max_states} states; "
                                "increase max_states, lower r_max, or coarsen "
                                "dedup_tol"
                            )
                        if cov is None:
                            cov = CovMatrix(mat, check=False)
                        queue.append(add(int(s_next), cov))

    grid = StateGrid(
        net_states=np.asarray(net_states, dtype=int),
        covs=covs,
        r_max=float(r_max),
        dedup_tol=float(dedup_tol),
        theta_id=0,
        num_net_states=N,
    )
    grid.finalize()
    theta = grid.lookup(net.s_circ, CovMatrix.zero(d), tol=1e-15)
    if theta is None:  # pragma: no cover - zero is always seeded
        raise RuntimeError("reference state (s_circ, 0) missing from grid")
    grid.theta_id = theta
    return grid


class CompiledKernel:
    """Exact kernel of the projected finite MDP, one sparse matrix per query.

    P[q][i, j] is the probability of moving from grid state i to grid
    state j under query q, with off-grid successors projected.  The trace
    term of the running cost is precomputed against a supplied weight.
    """

    def __init__(self, grid: StateGrid, plant, net):
        self.grid = grid
        self.plant = plant
        self.net = net
        n = len(grid)
        self.P = []
        for q in range(net.num_queries):
            rows, cols, vals = [], [], []
            for i in range(n):
                s = int(grid.net_states[i])
                sigma = grid.covs[i].entries
                lam = float(net.loss[s, q])
                row = net.P[q][s]
                nz = np.nonzero(row >= PRUNE_TOL)[0]
                if 1.0 - lam >= PRUNE_TOL:
                    hit = t_q_mat(plant, q, s, sigma)
                    for s_next in nz:
                        rows.append(i)
                        cols.append(grid.project(int(s_next), hit))
                        vals.append(row[s_next] * (1.0 - lam))
                if lam >= PRUNE_TOL:
                    miss = xi_mat(plant, sigma)
                    for s_next in nz:
                        rows.append(i)
                        cols.append(grid.project(int(s_next), miss))
                        vals.append(row[s_next] * lam)
            mat = scipy.sparse.coo_matrix(
                (vals, (rows, cols)), shape=(n, n)
            ).tocsr()
            mat.sum_duplicates()
            self.P.append(mat)

    def trace_term(self, pi_tilde):
        """trace(pi_tilde @ Sigma_z) for every grid state."""
        w = as_matrix(pi_tilde)
        stack = np.stack([c.entries for c in self.grid.covs])
        return np.einsum("ij,nji->n", w, stack)

    def cost_matrix(self, pi_tilde):
        """Running cost c_q(z) as an (n, |Q|) array."""
        tr = self.trace_term(pi_tilde)
        s_of = self.grid.net_states
        return self.net.net_cost[s_of, :] + tr[:, None]

    def bellman(self, cost, f, alpha=1.0):
        """min_q { c_q + alpha * P_q f } and its minimizer (lowest q wins)."""
        vals = np.stack(
            [cost[:, q] + alpha * (self.P[q] @ f) for q in range(len(self.P))],
            axis=1,
        )
        mins = np.argmin(vals, axis=1)
        return vals[np.arange(len(f)), mins], mins.astype(int)

    def policy_kernel(self, table):
        """Row-wise selection of P under a per-state query table."""
        n = len(self.grid)
        rows = [self.P[int(table[i])][i] for i in range(n)]
        return scipy.sparse.vstack(rows).tocsr()


@dataclass
class ValueTable:
    """Value function and minimizing query on a StateGrid."""

    grid: StateGrid
    values: np.ndarray
    minimizer: np.ndarray
    alpha: float = 1.0
    rho_star: float = float("nan")
    iteration_count: int = 0
    span_residual: float = float("nan")


@dataclass
class SchedulingPolicy:
    """Total stationary policy: table lookup plus boundary projection."""

    grid: StateGrid
    table: np.ndarray
    kind: str = "table-lookup"
    horizon_stage: int | None = None

    def __call__(self, s, sigma):
        return int(self.table[self.grid.project(int(s), sigma)])


def span(x):
    return float(np.max(x) - np.min(x))


def finite_horizon_dp(grid, plant, net, alpha, horizon, Pi_fin, compiled=None):
    """Backward DP over the grid with the time-varying Riccati weights.

    Returns value tables for t = 0..horizon; the terminal table is zero
    and carries no meaningful minimizer.
    """
    from .riccati import finite_horizon_lqr

    ck = compiled or CompiledKernel(grid, plant, net)
    pis, _ = finite_horizon_lqr(plant, alpha, horizon, Pi_fin)
    n = len(grid)
    tables = [None] * (horizon + 1)
    tables[horizon] = ValueTable(
        grid, np.zeros(n), np.zeros(n, dtype=int), alpha=alpha
    )
    f_next = np.zeros(n)
    for t in range(horizon - 1, -1, -1):
        pi_tilde = pi_tilde_of(plant, alpha, pis[t].entries)
        cost = ck.cost_matrix(pi_tilde)
        f_t, q_t = ck.bellman(cost, f_next, alpha=alpha)
        tables[t] = ValueTable(grid, f_t, q_t, alpha=alpha, iteration_count=horizon - t)
        f_next = f_t
    return tables


def discounted_vi(
    grid,
    plant,
    net,
    alpha,
    tol=1e-8,
    max_iter=100_000,
    initial=None,
    compiled=None,
) -> ValueTable:
    """Successive approximation for the discounted DP equation.

    Stops when the sup-norm of the update, weighted by
    1 + trace(Pi_tilde_alpha Sigma), falls below tol.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie in (0, 1) for discounted VI")
    ck = compiled or CompiledKernel(grid, plant, net)
    sol = solve_are(plant, alpha)
    cost = ck.cost_matrix(sol.Pi_tilde)
    weight = 1.0 + ck.trace_term(sol.Pi_tilde)
    f = np.zeros(len(grid)) if initial is None else np.asarray(initial, float).copy()
    for it in range(1, max_iter + 1):
        f_new, mins = ck.bellman(cost, f, alpha=alpha)
        resid = float(np.max(np.abs(f_new - f) / weight))
        f = f_new
        if resid <= tol:
            return ValueTable(
                grid, f, mins, alpha=alpha, iteration_count=it, span_residual=resid
            )
    raise ConvergenceError(
        f"discounted VI did not converge in {max_iter} iterations", residual=resid
    )


def rvi(
    grid,
    plant,
    net,
    tol=1e-8,
    max_iter=100_000,
    initial=None,
    compiled=None,
    override_minorization=False,
    pi_tilde=None,
) -> ValueTable:
    """Relative value iteration for the average-cost Bellman equation.

    Iterates the Bellman backup and renormalizes by the value at the
    reference state theta = (s_circ, 0); stops on the span seminorm of
    the update.  The anchored offset at theta estimates the optimal
    average cost.
    """
    if not override_minorization:
        mr = check_minorization(net)
        if not mr.success:
            raise PossiblyUnstableError(
                "minorization certificate failed "
                f"({mr.reason}); pass override_minorization=True to proceed"
            )
    ck = compiled or CompiledKernel(grid, plant, net)
    if pi_tilde is None:
        pi_tilde = solve_are(plant, 1.0).Pi_tilde
    cost = ck.cost_matrix(pi_tilde)
    theta = grid.theta_id
    phi = np.zeros(len(grid)) if initial is None else np.asarray(initial, float).copy()
    spans = []
    for it in range(1, max_iter + 1):
        bell, mins = ck.bellman(cost, phi, alpha=1.0)
        phi_new = bell - phi[theta]
        sp = span(phi_new - phi)
        spans.append(sp)
        rho = float(bell[theta] - phi[theta])
        phi = phi_new
        if sp <= tol:
            return ValueTable(
                grid,
                phi,
                mins,
                alpha=1.0,
                rho_star=rho,
                iteration_count=it,
                span_residual=sp,
            )
    raise PossiblyUnstableError(
        f"RVI span did not contract below {tol} in {max_iter} iterations; "
        "the model may not be stabilizable at these loss rates",
        residual=spans[-1],
        history=spans,
    )


def value_iteration(
    grid, plant, net, rho_star, n_iter, phi0=None, compiled=None, pi_tilde=None
):
    """Plain VI with a known average cost; records every iterate.

    Returns (values, minimizers): values[k] is phi_k for k = 0..n_iter,
    minimizers[k] is the selector used in the backup producing phi_{k+1}.
    """
    ck = compiled or CompiledKernel(grid, plant, net)
    if pi_tilde is None:
        pi_tilde = solve_are(plant, 1.0).Pi_tilde
    cost = ck.cost_matrix(pi_tilde)
    phi = np.zeros(len(grid)) if phi0 is None else np.asarray(phi0, float).copy()
    values = [phi.copy()]
    minimizers = []
    for _ in range(n_iter):
        bell, mins = ck.bellman(cost, phi, alpha=1.0)
        phi = bell - rho_star
        values.append(phi.copy())
        minimizers.append(mins)
    return values, minimizers


def rolling_horizon_policy(value_table: ValueTable) -> SchedulingPolicy:
    """Stationary policy read off a value-iteration stage's minimizer."""
    return SchedulingPolicy(
        grid=value_table.grid,
        table=np.asarray(value_table.minimizer, dtype=int).copy(),
        horizon_stage=value_table.iteration_count,
    )


def evaluate_policy_cost(
    grid, policy, plant, net, horizon, start=None, compiled=None, pi_tilde=None
):
    """Exact expected average cost of a policy on the projected chain.

    Iterates the occupation distribution for `horizon` steps from the
    start state (default: theta) and returns the time-averaged expected
    running cost.
    """
    ck = compiled or CompiledKernel(grid, plant, net)
    if pi_tilde is None:
        pi_tilde = solve_are(plant, 1.0).Pi_tilde
    if isinstance(policy, SchedulingPolicy) and policy.grid is grid:
        table = policy.table
    else:
        table = np.array(
            [policy(int(grid.net_states[i]), grid.covs[i]) for i in range(len(grid))],
            dtype=int,
        )
    cost = ck.cost_matrix(pi_tilde)
    c_pol = cost[np.arange(len(grid)), table]
    P_pol = ck.policy_kernel(table)
    mu = np.zeros(len(grid))
    mu[grid.theta_id if start is None else int(start)] = 1.0
    total = 0.0
    for _ in range(horizon):
        total += float(mu @ c_pol)
        mu = P_pol.T @ mu
    return total / horizon


def fit_growth_constants(cost_min, f_star):
    """Fit (theta1, theta2) with min_q c_q(z) >= theta1 f*(z) - theta2.

    These constants exist but are not constructive in general; the fit is
    used only to check drift and sandwich bounds, never inside a solver.
    """
    f = np.asarray(f_star, float)
    c = np.asarray(cost_min, float)
    pos = f > max(1e-9, 1e-9 * float(np.max(np.abs(f)))) if len(f) else f > 0
    if not np.any(pos):
        theta1 = 0.5
    else:
        theta1 = float(np.clip(0.9 * np.min(c[pos] / f[pos]), 1e-6, 0.95))
    theta2 = float(max(np.max(theta1 * f - c), 0.0)) + 1e-12
    return theta1, theta2
