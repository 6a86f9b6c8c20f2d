"""Stabilizable loss-rate regions: analytic criteria, drift certificates, probes.

Three verdict engines, in decreasing order of authority:

* the analytic box for equal-gain diagonal systems,
* a Lyapunov drift certificate for two-subsystem diagonal models, and
* an empirical probe of the covariance-only chain that propagates the exact
  expectation of the error trace through the branching reception/loss process.

The expectation is carried by a weighted particle population in log scale, so
geometric growth (instability) and convergence (stability) are both detected
without overflow even when individual covariance branches reach 4**10000.
A sampled Monte-Carlo chain runs alongside the expectation engine and
contributes divergence counts and slope statistics as confidence metadata; it
cannot carry the verdict alone because near the boundary the stationary trace
distribution has an infinite-mean power tail that finite sample means
systematically underestimate.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import ConsistencyError, ModelError
from .model import NetworkModel, PlantModel
from .psd import CovMatrix
from .riccati import solve_are

DIVERGENCE_TRACE = 1e12
GROWTH_LOG_FACTOR = np.log(1e10)
FLAT_LOG_TOL = 1e-6
PRUNE_REL = 1e-8
MERGE_TOL = 1e-4
MAX_PARTICLES = 4_000
SLOPE_TOL_LEVEL_FACTOR = 1e-3


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    UNDETERMINED = "undetermined"


@dataclass(frozen=True)
class RegionSample:
    """One probed loss-rate point with its verdict and supporting data."""

    lam: np.ndarray
    verdict: Verdict
    evidence: str  # "analytic" | "drift-certificate" | "monte-carlo"
    details: dict = field(default_factory=dict)


@dataclass(frozen=True)
class DiagonalRegion:
    """Description of the stabilizable box for a diagonal plant."""

    a_values: tuple
    critical_rates: tuple
    exact: bool  # True only in the equal-gain case where the box is tight

    @property
    def box(self):
        if not self.exact:
            return None
        return tuple((0.0, r) for r in self.critical_rates)

    def classify(self, lam) -> Verdict:
        lam = np.asarray(lam, dtype=float)
        if np.any(lam >= np.asarray(self.critical_rates)):
            # outside a per-coordinate necessary condition: unstable either way
            return Verdict.UNSTABLE
        return Verdict.STABLE if self.exact else Verdict.UNDETERMINED


def diagonal_region(a_values) -> DiagonalRegion:
    """Stabilizable loss-rate region for a diagonal plant with unit sensors.

    For equal subsystem gains a > 1 the region is exactly the open box
    [0, 1/a^2)^N.  For unequal gains only the per-coordinate necessary
    conditions lam_i < a_i^-2 are reported and the joint region is marked
    inexact.
    """
    a_values = tuple(float(a) for a in a_values)
    if not a_values:
        raise ModelError("diagonal_region requires at least one subsystem gain")
    if any(a <= 1.0 for a in a_values):
        raise ModelError(
            f"diagonal_region requires every gain > 1, got {a_values}; "
            "a contracting subsystem makes the scheduling question trivial"
        )
    equal = max(a_values) - min(a_values) <= 1e-12 * max(a_values)
    rates = tuple(1.0 / (a * a) for a in a_values)
    return DiagonalRegion(a_values=a_values, critical_rates=rates, exact=equal)


# ---------------------------------------------------------------------------
# Lyapunov drift certificate for the two-subsystem equal-gain diagonal model
# ---------------------------------------------------------------------------


def epsilon_zero(a: float, lam: float, eps: float) -> float:
    """Contraction factor of the weighted-error Lyapunov function."""
    return (eps / (1.0 - eps) + lam) * a * a


def v_eps(xi: np.ndarray, eps: float) -> np.ndarray:
    """Two-coordinate weighted error, small weight on the larger coordinate."""
    xi = np.asarray(xi, dtype=float)
    hi = np.maximum(xi[..., 0], xi[..., 1])
    lo = np.minimum(xi[..., 0], xi[..., 1])
    return eps * hi + (1.0 - eps) * lo


def _diag_branches(a: float, f: np.ndarray, xi: np.ndarray, q: int):
    """Received / lost successor error pairs for querying subsystem q."""
    grown = 1.0 + a * a * xi
    received = grown.copy()
    fq2 = f[q] * f[q]
    received[..., q] = fq2 * grown[..., q] / (grown[..., q] + fq2)
    return received, grown


def drift_certificate_diagonal(
    a: float,
    f_values,
    lam: float,
    epsilon: float | None = None,
    samples: int = 10_000,
    seed: int = 0,
) -> RegionSample:
    """Search for a weighted-error drift certificate of mean stability.

    Looks for eps in (0, 1) with contraction factor eps0 < 1, then verifies
    min_q E[V(xi') | query q] - V(xi) <= c0 - (1 - eps0) V(xi) on random
    error pairs spanning many magnitudes.  Returns a Stable sample carrying
    the certificate on success and an Undetermined sample on failure.
    """
    a = float(a)
    lam = float(lam)
    f = np.asarray(f_values, dtype=float)
    if a <= 1.0:
        raise ModelError(f"drift certificate requires gain a > 1, got {a}")
    if f.shape != (2,):
        raise ModelError("drift certificate covers exactly two subsystems")

    lam_vec = np.array([lam, lam])
    if epsilon is not None:
        grid = [float(epsilon)]
    else:
        grid = list(np.logspace(-8, np.log10(0.49), 60)[::-1])
    chosen = None
    for eps in grid:
        if epsilon_zero(a, lam, eps) < 1.0:
            chosen = eps
            break
    if chosen is None:
        return RegionSample(
            lam=lam_vec,
            verdict=Verdict.UNDETERMINED,
            evidence="drift-certificate",
            details={"reason": "no epsilon with contraction factor below 1"},
        )

    eps = chosen
    eps0 = epsilon_zero(a, lam, eps)
    rng = np.random.default_rng(seed)
    # error pairs over many orders of magnitude, including the axes
    scales = 10.0 ** rng.uniform(-2, 8, size=samples)
    shapes = rng.random((samples, 2))
    shapes[: samples // 20, rng.integers(0, 2)] = 0.0
    xi = scales[:, None] * shapes

    drift_gap = np.full(samples, np.inf)
    for q in (0, 1):
        received, lost = _diag_branches(a, f, xi, q)
        exp_v = (1.0 - lam) * v_eps(received, eps) + lam * v_eps(lost, eps)
        drift_gap = np.minimum(drift_gap, exp_v - v_eps(xi, eps))
    residual = drift_gap + (1.0 - eps0) * v_eps(xi, eps)
    c0 = float(max(residual.max(), 0.0))
    return RegionSample(
        lam=lam_vec,
        verdict=Verdict.STABLE,
        evidence="drift-certificate",
        details={
            "epsilon": eps,
            "epsilon0": eps0,
            "c0": c0,
            "samples_checked": samples,
            "max_scale_checked": float(scales.max()),
        },
    )


# ---------------------------------------------------------------------------
# Covariance-only chain engines
# ---------------------------------------------------------------------------


def _trace_weight(plant: PlantModel, weight) -> np.ndarray:
    """Reporting weight for the error trace; near-optimal cost weight if solvable."""
    if weight is not None:
        return np.asarray(weight, dtype=float)
    try:
        return np.asarray(solve_are(plant).Pi_tilde)
    except Exception:
        return np.eye(plant.dim)


def _normalize_policy(policy, num_queries: int):
    """Return (kind, payload) for a policy spec shared by both engines."""
    if callable(policy):
        return "callable", policy
    if isinstance(policy, (int, np.integer)):
        if not 0 <= int(policy) < num_queries:
            raise ModelError(f"fixed query {policy} out of range")
        return "fixed", int(policy)
    if policy == "greedy":
        return "greedy", None
    if policy == "round-robin":
        return "round-robin", None
    raise ModelError(f"unknown policy source {policy!r}")


def _stacked_sensors(plant: PlantModel, net: NetworkModel):
    """Per (q, s) observation data: C, F F^T, loss rate."""
    out = {}
    for q in range(plant.num_queries):
        for s in range(net.num_states):
            c = plant.C[q][s]
            ff = plant.F[q][s] @ plant.F[q][s].T
            out[(q, s)] = (c, ff, float(net.loss[s, q]))
    return out


@dataclass
class CovChainResult:
    """Sampled covariance-chain paths: weighted traces and divergence flags."""

    trace: np.ndarray  # (replications, T)
    diverged: np.ndarray  # (replications,) bool
    queries: np.ndarray  # (replications, T) int
    net_states: np.ndarray  # (replications, T) int

    @property
    def mean_trace(self) -> np.ndarray:
        return self.trace.mean(axis=0)


def _batched_time_update(A, DDt, sigma):
    return DDt + np.einsum("ij,rjk,lk->ril", A, sigma, A)


def _batched_measurement_update(c, ff, xi):
    """Joseph-form received update applied to a stack of prior covariances."""
    cx = np.einsum("ij,rjk->rik", c, xi)
    innov = np.einsum("rik,jk->rij", cx, c) + ff
    innov = innov + 1e-13 * np.trace(innov, axis1=1, axis2=2)[:, None, None] * np.eye(
        innov.shape[1]
    )
    gain = np.linalg.solve(innov, cx).transpose(0, 2, 1)  # (r, d, p)
    ikc = np.eye(xi.shape[1]) - gain @ c
    out = np.einsum("rij,rjk,rlk->ril", ikc, xi, ikc) + np.einsum(
        "rij,jk,rlk->ril", gain, ff, gain
    )
    return 0.5 * (out + out.transpose(0, 2, 1))


def simulate_cov_chain(
    plant: PlantModel,
    net: NetworkModel,
    policy="greedy",
    T: int = 10_000,
    replications: int = 50,
    seed: int = 0,
    weight=None,
    divergence_trace: float = DIVERGENCE_TRACE,
) -> CovChainResult:
    """Sample the covariance recursion under reception/loss and network noise.

    Loss draws use the common-uniform convention gamma = (u >= lam), so runs
    with the same seed and query sequence are pathwise coupled across loss
    rates: raising any loss rate can only raise every trace along the path.
    Diverged replications (trace beyond the threshold) are frozen in place.
    """
    w_mat = _trace_weight(plant, weight)
    kind, payload = _normalize_policy(policy, plant.num_queries)
    sensors = _stacked_sensors(plant, net)
    d = plant.dim
    ddt = plant.D @ plant.D.T
    a_mat = plant.A
    p_cum = [np.cumsum(p, axis=1) for p in net.P]

    rng = np.random.default_rng(np.random.SeedSequence(seed))
    sigma = np.zeros((replications, d, d))
    s = np.full(replications, net.s_circ, dtype=np.int64)
    diverged = np.zeros(replications, dtype=bool)
    trace = np.empty((replications, T))
    queries = np.empty((replications, T), dtype=np.int64)
    states = np.empty((replications, T), dtype=np.int64)

    for t in range(T):
        live = ~diverged
        xi = _batched_time_update(a_mat, ddt, sigma)
        if kind == "fixed":
            q = np.full(replications, payload, dtype=np.int64)
        elif kind == "round-robin":
            q = np.full(replications, t % plant.num_queries, dtype=np.int64)
        elif kind == "callable":
            q = np.array(
                [payload(int(s[r]), sigma[r]) for r in range(replications)],
                dtype=np.int64,
            )
        else:  # greedy: smallest expected weighted trace over the two branches
            score = np.full((replications, plant.num_queries), np.inf)
            tr_xi = np.einsum("ij,rji->r", w_mat, xi)
            for q_idx in range(plant.num_queries):
                for s_idx in range(net.num_states):
                    mask = live & (s == s_idx)
                    if not mask.any():
                        continue
                    c, ff, lam_sq = sensors[(q_idx, s_idx)]
                    recv = _batched_measurement_update(c, ff, xi[mask])
                    tr_recv = np.einsum("ij,rji->r", w_mat, recv)
                    score[mask, q_idx] = (
                        1.0 - lam_sq
                    ) * tr_recv + lam_sq * tr_xi[mask]
            q = np.argmin(score, axis=1)

        u_net = rng.random(replications)
        u_loss = rng.random(replications)
        new_sigma = sigma.copy()
        new_s = s.copy()
        for q_idx in range(plant.num_queries):
            for s_idx in range(net.num_states):
                mask = live & (q == q_idx) & (s == s_idx)
                if not mask.any():
                    continue
                c, ff, lam_sq = sensors[(q_idx, s_idx)]
                got = u_loss[mask] >= lam_sq
                branch = xi[mask].copy()
                if got.any():
                    branch[got] = _batched_measurement_update(c, ff, branch[got])
                new_sigma[mask] = branch
                new_s[mask] = np.searchsorted(
                    p_cum[q_idx][s_idx], u_net[mask], side="right"
                ).clip(max=net.num_states - 1)
        sigma = np.where(live[:, None, None], new_sigma, sigma)
        s = np.where(live, new_s, s)
        tr = np.einsum("ij,rji->r", w_mat, sigma)
        diverged |= tr > divergence_trace
        trace[:, t] = tr
        queries[:, t] = q
        states[:, t] = s
    return CovChainResult(trace=trace, diverged=diverged, queries=queries, net_states=states)


def running_mean_slope(mean_trace: np.ndarray):
    """Slope and level of the running mean over the second half of the horizon."""
    horizon = len(mean_trace)
    running = np.cumsum(mean_trace) / np.arange(1, horizon + 1)
    window = np.arange(horizon // 2, horizon)
    slope = float(np.polyfit(window, running[window], 1)[0])
    level = float(running[window].mean())
    return slope, level


# --- exact expectation of the trace through the branching loss process -----


@dataclass
class _Population:
    """Unit-trace covariance shapes with log scales and log weights."""

    s: np.ndarray  # (n,) net state
    shape: np.ndarray  # (n, d, d), trace 1
    log_scale: np.ndarray  # (n,)
    log_w: np.ndarray  # (n,)


def _seg_logsumexp(vals: np.ndarray, starts: np.ndarray) -> np.ndarray:
    segmax = np.maximum.reduceat(vals, starts)
    lengths = np.diff(np.append(starts, len(vals)))
    seg_id = np.repeat(np.arange(len(starts)), lengths)
    sums = np.add.reduceat(np.exp(vals - segmax[seg_id]), starts)
    return segmax + np.log(sums)


def _scaled_time_update(a_mat, ddt, pop_shape, log_scale):
    """Time update of sigma = exp(m) S, returned as unit-trace shape + log trace."""
    small = np.exp(np.clip(-log_scale, None, 700.0))
    g = np.einsum("ij,rjk,lk->ril", a_mat, pop_shape, a_mat) + small[:, None, None] * ddt
    tr = np.trace(g, axis1=1, axis2=2)
    tr = np.maximum(tr, 1e-300)
    return g / tr[:, None, None], log_scale + np.log(tr)


def _scaled_measurement_update(c, ff, shape, log_scale):
    """Received update of exp(m) X with the noise floor scaled into the shape."""
    small = np.exp(np.clip(-log_scale, None, 700.0))
    cx = np.einsum("ij,rjk->rik", c, shape)
    innov = np.einsum("rik,jk->rij", cx, c) + small[:, None, None] * ff
    innov = innov + 1e-13 * (
        np.trace(innov, axis1=1, axis2=2)[:, None, None] + 1e-300
    ) * np.eye(innov.shape[1])
    gain = np.linalg.solve(innov, cx).transpose(0, 2, 1)
    ikc = np.eye(shape.shape[1]) - gain @ c
    out = np.einsum("rij,rjk,rlk->ril", ikc, shape, ikc) + small[:, None, None] * np.einsum(
        "rij,jk,rlk->ril", gain, ff, gain
    )
    out = 0.5 * (out + out.transpose(0, 2, 1))
    tr = np.maximum(np.trace(out, axis1=1, axis2=2), 1e-300)
    return out / tr[:, None, None], log_scale + np.log(tr)


def _merge_population(pop: _Population, merge_tol: float) -> _Population:
    n, d, _ = pop.shape.shape
    key = np.empty((n, 2 + d * d), dtype=np.int64)
    key[:, 0] = pop.s
    key[:, 1] = np.round(pop.log_scale / merge_tol)
    key[:, 2:] = np.round(pop.shape.reshape(n, d * d) / merge_tol)
    # row-wise dedup via a byte view: much faster than array-valued unique
    flat = np.ascontiguousarray(key).view([("", np.int64)] * key.shape[1]).ravel()
    _, first, inverse = np.unique(flat, return_index=True, return_inverse=True)
    order = np.argsort(inverse, kind="stable")
    starts = np.concatenate([[0], np.flatnonzero(np.diff(inverse[order])) + 1])
    log_w = _seg_logsumexp(pop.log_w[order], starts)
    reps = order[starts]
    return _Population(
        s=pop.s[reps], shape=pop.shape[reps], log_scale=pop.log_scale[reps], log_w=log_w
    )


@dataclass
class ExpectationTrace:
    """Exact expected-trace trajectory of the branching covariance process."""

    log_expected_trace: np.ndarray
    verdict: Verdict
    stopped_at: int
    max_population: int
    capped: bool


def expected_trace_growth(
    plant: PlantModel,
    net: NetworkModel,
    policy="greedy",
    T: int = 10_000,
    weight=None,
    prune_rel: float = PRUNE_REL,
    merge_tol: float = MERGE_TOL,
    max_particles: int = MAX_PARTICLES,
    growth_log_factor: float = GROWTH_LOG_FACTOR,
    flat_window: int = 500,
    flat_tol: float = FLAT_LOG_TOL,
) -> ExpectationTrace:
    """Propagate E[trace of the error covariance] through every loss branch.

    Every reception/loss and network transition is enumerated with its exact
    probability, so the output is the true expectation up to merge/prune
    truncation, not a sample.  Particles live in log scale; pruning removes
    only branches whose relative contribution is negligible *and shrinking*,
    which leaves geometric growth intact.  Stops early on clear geometric
    growth (Unstable) or a flat expectation (Stable).
    """
    w_mat = _trace_weight(plant, weight)
    kind, payload = _normalize_policy(policy, plant.num_queries)
    sensors = _stacked_sensors(plant, net)
    d = plant.dim
    ddt = plant.D @ plant.D.T
    a_mat = plant.A
    if np.trace(ddt) > 0:
        seed_shape = ddt / np.trace(ddt)
        seed_scale = np.log(np.trace(ddt))
    else:
        seed_shape = np.eye(d) / d
        seed_scale = np.log(1e-6)
    pop = _Population(
        s=np.array([net.s_circ], dtype=np.int64),
        shape=seed_shape[None, :, :],
        log_scale=np.array([seed_scale]),
        log_w=np.array([0.0]),
    )
    net_children = {
        (q, s): np.flatnonzero(net.P[q][s] > 0.0)
        for q in range(plant.num_queries)
        for s in range(net.num_states)
    }

    log_e = np.full(T, -np.inf)
    max_pop = 1
    capped = False
    verdict = Verdict.UNDETERMINED
    stopped_at = T
    for t in range(T):
        xi_shape, xi_scale = _scaled_time_update(a_mat, ddt, pop.shape, pop.log_scale)
        n = len(pop.s)
        # candidate branch values per query for the particles that need them
        branch = {}
        for q_idx in range(plant.num_queries):
            if kind == "fixed" and q_idx != payload:
                continue
            if kind == "round-robin" and q_idx != t % plant.num_queries:
                continue
            recv_shape = np.empty_like(xi_shape)
            recv_scale = np.empty(n)
            lam_arr = np.empty(n)
            for s_idx in range(net.num_states):
                mask = pop.s == s_idx
                if not mask.any():
                    continue
                c, ff, lam_sq = sensors[(q_idx, s_idx)]
                recv_shape[mask], recv_scale[mask] = _scaled_measurement_update(
                    c, ff, xi_shape[mask], xi_scale[mask]
                )
                lam_arr[mask] = lam_sq
            branch[q_idx] = (recv_shape, recv_scale, lam_arr)

        if kind == "greedy":
            score = np.full((n, plant.num_queries), np.inf)
            tr_xi = np.einsum("ij,rji->r", w_mat, xi_shape)
            for q_idx, (r_shape, r_scale, lam_arr) in branch.items():
                tr_recv = np.einsum("ij,rji->r", w_mat, r_shape)
                with np.errstate(divide="ignore"):
                    recv_term = np.log(
                        np.maximum((1.0 - lam_arr) * np.maximum(tr_recv, 0.0), 0.0)
                    ) + r_scale
                    loss_term = np.log(lam_arr * np.maximum(tr_xi, 1e-300)) + xi_scale
                score[:, q_idx] = np.logaddexp(recv_term, loss_term)
            q_of = np.argmin(score, axis=1)
        elif kind == "fixed":
            q_of = np.full(n, payload, dtype=np.int64)
        elif kind == "round-robin":
            q_of = np.full(n, t % plant.num_queries, dtype=np.int64)
        else:
            q_of = np.array(
                [
                    payload(int(pop.s[i]), np.exp(min(pop.log_scale[i], 700.0)) * pop.shape[i])
                    for i in range(n)
                ],
                dtype=np.int64,
            )
            for q_idx in np.unique(q_of):
                if q_idx not in branch:
                    recv_shape = np.empty_like(xi_shape)
                    recv_scale = np.empty(n)
                    lam_arr = np.empty(n)
                    for s_idx in range(net.num_states):
                        mask = pop.s == s_idx
                        if not mask.any():
                            continue
                        c, ff, lam_sq = sensors[(q_idx, s_idx)]
                        recv_shape[mask], recv_scale[mask] = _scaled_measurement_update(
                            c, ff, xi_shape[mask], xi_scale[mask]
                        )
                        lam_arr[mask] = lam_sq
                    branch[q_idx] = (recv_shape, recv_scale, lam_arr)

        child_s, child_shape, child_scale, child_lw = [], [], [], []
        for q_idx in np.unique(q_of):
            r_shape, r_scale, lam_arr = branch[q_idx]
            for s_idx in range(net.num_states):
                mask = (q_of == q_idx) & (pop.s == s_idx)
                if not mask.any():
                    continue
                c, ff, lam_sq = sensors[(q_idx, s_idx)]
                succ = net_children[(q_idx, s_idx)]
                logp = np.log(net.P[q_idx][s_idx][succ])
                for s_next, lp in zip(succ, logp):
                    if lam_sq < 1.0:
                        child_s.append(np.full(mask.sum(), s_next, dtype=np.int64))
                        child_shape.append(r_shape[mask])
                        child_scale.append(r_scale[mask])
                        child_lw.append(pop.log_w[mask] + lp + np.log1p(-lam_sq))
                    if lam_sq > 0.0:
                        child_s.append(np.full(mask.sum(), s_next, dtype=np.int64))
                        child_shape.append(xi_shape[mask])
                        child_scale.append(xi_scale[mask])
                        child_lw.append(pop.log_w[mask] + lp + np.log(lam_sq))
        pop = _Population(
            s=np.concatenate(child_s),
            shape=np.concatenate(child_shape),
            log_scale=np.concatenate(child_scale),
            log_w=np.concatenate(child_lw),
        )
        pop = _merge_population(pop, merge_tol)

        contrib = pop.log_w + pop.log_scale  # log of weight * trace
        top = contrib.max()
        log_e[t] = top + np.log(np.exp(contrib - top).sum())
        keep = contrib > log_e[t] + np.log(prune_rel)
        if keep.sum() > max_particles:
            order = np.argsort(contrib)[::-1][:max_particles]
            keep = np.zeros(len(contrib), dtype=bool)
            keep[order] = True
            capped = True
        pop = _Population(
            s=pop.s[keep],
            shape=pop.shape[keep],
            log_scale=pop.log_scale[keep],
            log_w=pop.log_w[keep],
        )
        max_pop = max(max_pop, len(pop.s))

        if log_e[t] > np.log(DIVERGENCE_TRACE):
            verdict, stopped_at = Verdict.UNSTABLE, t + 1
            break
        ref = max(flat_window // 2, 1)
        if t > ref and log_e[t] - log_e[ref] > growth_log_factor:
            verdict, stopped_at = Verdict.UNSTABLE, t + 1
            break
        if t >= 2 * flat_window:
            window = log_e[t - flat_window : t + 1]
            if np.abs(window - window[-1]).max() < flat_tol:
                verdict, stopped_at = Verdict.STABLE, t + 1
                break
    else:
        drift = log_e[T - 1] - log_e[3 * T // 4]
        if drift <= 0.01:
            verdict = Verdict.STABLE
        elif drift > np.log(2.0):
            verdict = Verdict.UNSTABLE
    return ExpectationTrace(
        log_expected_trace=log_e[:stopped_at],
        verdict=verdict,
        stopped_at=stopped_at,
        max_population=max_pop,
        capped=capped,
    )


def mc_stability_probe(
    plant: PlantModel,
    net_builder,
    lam,
    policy="greedy",
    T: int = 10_000,
    replications: int = 50,
    seed: int = 0,
    weight=None,
    **engine_kwargs,
) -> RegionSample:
    """Empirical stability verdict at one loss-rate point.

    The verdict follows the exact expected-trace engine; the sampled chain
    contributes divergence counts (which can only strengthen an Unstable
    call) and slope/level statistics as confidence metadata.
    """
    lam = np.asarray(lam, dtype=float)
    net = net_builder(lam)
    w_mat = _trace_weight(plant, weight)
    expectation = expected_trace_growth(
        plant, net, policy=policy, T=T, weight=w_mat, **engine_kwargs
    )
    details = {
        "expected_trace_final": float(
            np.exp(min(expectation.log_expected_trace[-1], 700.0))
        ),
        "expectation_verdict": expectation.verdict.value,
        "expectation_stopped_at": expectation.stopped_at,
        "max_population": expectation.max_population,
        "population_capped": expectation.capped,
    }
    verdict = expectation.verdict
    if replications > 0:
        sample_T = min(T, max(expectation.stopped_at, 1000))
        chain = simulate_cov_chain(
            plant,
            net,
            policy=policy,
            T=sample_T,
            replications=replications,
            seed=seed,
            weight=w_mat,
        )
        slope, level = running_mean_slope(chain.mean_trace)
        n_div = int(chain.diverged.sum())
        details.update(
            {
                "replications": replications,
                "diverged": n_div,
                "slope": slope,
                "level": level,
                "slope_tol": SLOPE_TOL_LEVEL_FACTOR * level,
            }
        )
        if n_div > 0:
            verdict = Verdict.UNSTABLE
    return RegionSample(lam=lam, verdict=verdict, evidence="monte-carlo", details=details)


def greedy_policy(plant: PlantModel, net: NetworkModel, weight=None):
    """Myopic query rule: smallest expected weighted trace one step ahead."""
    w_mat = _trace_weight(plant, weight)
    sensors = _stacked_sensors(plant, net)
    ddt = plant.D @ plant.D.T

    def choose(s: int, sigma) -> int:
        sigma = np.asarray(sigma, dtype=float)[None, :, :]
        xi = _batched_time_update(plant.A, ddt, sigma)
        tr_xi = float(np.einsum("ij,rji->r", w_mat, xi)[0])
        best_q, best = 0, np.inf
        for q in range(plant.num_queries):
            c, ff, lam_sq = sensors[(q, s)]
            recv = _batched_measurement_update(c, ff, xi)
            tr_recv = float(np.einsum("ij,rji->r", w_mat, recv)[0])
            score = (1.0 - lam_sq) * tr_recv + lam_sq * tr_xi
            if score < best:
                best_q, best = q, score
        return best_q

    return choose


# ---------------------------------------------------------------------------
# Region mapping by ray bisection
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RayBoundary:
    """Bracket of the critical scale along one ray of loss rates."""

    direction: np.ndarray
    stable_scale: float
    unstable_scale: float
    saturated: bool
    undetermined: bool


@dataclass
class RegionMap:
    samples: list
    boundaries: list

    def __iter__(self):
        return iter(self.samples)


def uniform_loss_builder(base_net: NetworkModel):
    """Network family where one loss-rate vector applies in every net state."""

    def build(lam):
        lam = np.asarray(lam, dtype=float)
        return base_net.with_loss(np.tile(lam, (base_net.num_states, 1)))

    return build


def probe_oracle(plant: PlantModel, net_builder, **probe_kwargs):
    """Per-point verdict oracle over loss-rate vectors for map_region."""

    def oracle(lam) -> RegionSample:
        return mc_stability_probe(plant, net_builder, lam, **probe_kwargs)

    return oracle


def map_region(oracle, rays, tol: float = 0.01, max_probes_per_ray: int = 40) -> RegionMap:
    """Trace the stability boundary along rays from the origin in loss space.

    Along each ray the largest Stable and smallest Unstable scales are
    bisected to the requested bracket width.  Undetermined verdicts shrink
    the bracket from nearby probes when possible and otherwise terminate the
    ray with the bracket flagged.  All samples are cross-checked against
    order-convexity: a Stable point must never componentwise-dominate an
    Unstable one.
    """
    samples: list[RegionSample] = []
    boundaries: list[RayBoundary] = []

    def probe(direction, scale):
        sample = oracle(scale * direction)
        sample.details.setdefault("ray", tuple(float(x) for x in direction))
        sample.details.setdefault("scale", float(scale))
        samples.append(sample)
        return sample.verdict

    for ray in rays:
        direction = np.asarray(ray, dtype=float)
        if direction.min() < 0 or direction.max() <= 0:
            raise ModelError(f"ray direction must be nonnegative and nonzero, got {ray}")
        s_max = float(np.min(1.0 / direction[direction > 0]))
        lo, hi = 0.0, s_max
        undetermined = False
        if probe(direction, s_max) == Verdict.STABLE:
            boundaries.append(
                RayBoundary(
                    direction=direction,
                    stable_scale=s_max,
                    unstable_scale=s_max,
                    saturated=True,
                    undetermined=False,
                )
            )
            continue
        n_probes = 1
        while hi - lo > tol and n_probes < max_probes_per_ray:
            mid = 0.5 * (lo + hi)
            verdict = probe(direction, mid)
            n_probes += 1
            if verdict == Verdict.UNDETERMINED:
                moved = False
                for alt in (mid - 0.25 * (hi - lo), mid + 0.25 * (hi - lo)):
                    if not lo < alt < hi or n_probes >= max_probes_per_ray:
                        continue
                    v_alt = probe(direction, alt)
                    n_probes += 1
                    if v_alt == Verdict.STABLE:
                        lo, moved = alt, True
                        break
                    if v_alt == Verdict.UNSTABLE:
                        hi, moved = alt, True
                        break
                if not moved:
                    undetermined = True
                    break
            elif verdict == Verdict.STABLE:
                lo = mid
            else:
                hi = mid
        boundaries.append(
            RayBoundary(
                direction=direction,
                stable_scale=lo,
                unstable_scale=hi,
                saturated=False,
                undetermined=undetermined,
            )
        )

    stable_pts = [s.lam for s in samples if s.verdict == Verdict.STABLE]
    unstable_pts = [s.lam for s in samples if s.verdict == Verdict.UNSTABLE]
    for hi_lam in stable_pts:
        for lo_lam in unstable_pts:
            if np.all(lo_lam <= hi_lam + 1e-12):
                raise ConsistencyError(
                    "order-convexity violated: Stable verdict at "
                    f"{hi_lam} dominates Unstable verdict at {lo_lam}; "
                    "increase replications or the probe horizon"
                )
    return RegionMap(samples=samples, boundaries=boundaries)


def region_to_csv(region: RegionMap, path) -> None:
    """Write probed samples with verdicts and per-ray brackets for plotting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        n_q = len(region.samples[0].lam) if region.samples else 0
        writer.writerow(
            [f"lambda_{i}" for i in range(n_q)]
            + ["verdict", "evidence", "scale", "bracket_lo", "bracket_hi"]
        )
        brackets = {
            tuple(b.direction): (b.stable_scale, b.unstable_scale) for b in region.boundaries
        }
        for sample in region.samples:
            ray = sample.details.get("ray")
            lo, hi = brackets.get(ray, ("", ""))
            writer.writerow(
                [f"{x:.10g}" for x in sample.lam]
                + [
                    sample.verdict.value,
                    sample.evidence,
                    sample.details.get("scale", ""),
                    lo,
                    hi,
                ]
            )
