"""Plant, network, and cost data with validation of standing assumptions."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ModelError
from .psd import CovMatrix, min_eig

_EIG_TOL = 1e-9


@dataclass(frozen=True)
class PlantModel:
    """Linear-Gaussian plant with per-(query, net-state) sensor maps.

    A: d x d state matrix; B: d x d_u input; D: d x d_w noise input.
    R, M: positive definite state/control cost weights.
    C[q][s]: m_q x d observation matrix; F[q][s]: m_q x d_w measurement
    noise map.  The observation dimension m_q may vary per query.
    """

    A: np.ndarray
    B: np.ndarray
    D: np.ndarray
    R: CovMatrix
    M: CovMatrix
    C: tuple  # C[q][s]
    F: tuple  # F[q][s]

    def __post_init__(self):
        object.__setattr__(self, "A", _lock(self.A))
        object.__setattr__(self, "B", _lock(self.B))
        object.__setattr__(self, "D", _lock(self.D))
        object.__setattr__(
            self, "C", tuple(tuple(_lock(m) for m in row) for row in self.C)
        )
        object.__setattr__(
            self, "F", tuple(tuple(_lock(m) for m in row) for row in self.F)
        )

    @property
    def dim(self):
        return self.A.shape[0]

    @property
    def dim_u(self):
        return self.B.shape[1]

    @property
    def dim_w(self):
        return self.D.shape[1]

    @property
    def num_queries(self):
        return len(self.C)

    def obs_dim(self, q):
        return self.C[q][0].shape[0]


@dataclass(frozen=True)
class NetworkModel:
    """Markov-modulated network: per-query transitions, loss rates, costs.

    P[q]: N x N row-stochastic transition matrix under query q.
    loss[s, q]: probability the queried observation is dropped.
    net_cost[s, q]: per-step network cost.
    s_circ: reference network state (minimizes min_q net_cost).
    """

    P: tuple  # P[q], each N x N
    loss: np.ndarray  # N x |Q|
    net_cost: np.ndarray  # N x |Q|
    s_circ: int = 0

    def __post_init__(self):
        object.__setattr__(self, "P", tuple(_lock(p) for p in self.P))
        object.__setattr__(self, "loss", _lock(self.loss))
        object.__setattr__(self, "net_cost", _lock(self.net_cost))

    @property
    def num_states(self):
        return self.P[0].shape[0]

    @property
    def num_queries(self):
        return len(self.P)

    def with_loss(self, loss):
        """Copy with a replaced loss-rate table (region sweeps)."""
        return NetworkModel(
            P=self.P,
            loss=np.asarray(loss, dtype=float).reshape(self.loss.shape),
            net_cost=self.net_cost,
            s_circ=self.s_circ,
        )


def _lock(m):
    a = np.array(m, dtype=float)
    a.setflags(write=False)
    return a


def check_stabilizable(A, B):
    """PBH test: rank [lam*I - A | B] = d for every eigenvalue with |lam| >= 1.

    Returns (ok, failing) where failing lists the offending eigenvalues.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    d = A.shape[0]
    failing = []
    for lam in np.linalg.eigvals(A):
        if abs(lam) >= 1.0 - _EIG_TOL:
            pencil = np.hstack([lam * np.eye(d) - A, B])
            if np.linalg.matrix_rank(pencil, tol=1e-10) < d:
                failing.append(complex(lam))
    return len(failing) == 0, failing


def check_controllable(A, D):
    """Kalman rank test on [D | AD | ... | A^{d-1} D]."""
    A = np.asarray(A, dtype=float)
    D = np.asarray(D, dtype=float).reshape(A.shape[0], -1)
    d = A.shape[0]
    blocks = [D]
    for _ in range(d - 1):
        blocks.append(A @ blocks[-1])
    return np.linalg.matrix_rank(np.hstack(blocks), tol=1e-10) == d


def check_detectable(C_stacked, A):
    """PBH detectability of (C, A); dual of stabilizability."""
    ok, _ = check_stabilizable(np.asarray(A).T, np.asarray(C_stacked).T)
    return ok


@dataclass
class MinorizationResult:
    success: bool
    theta: float = 0.0
    p_tilde: np.ndarray | None = None
    reason: str = ""


def check_minorization(net: NetworkModel) -> MinorizationResult:
    """Certify a uniform minorization p_q(s,s') >= theta * p_tilde(s,s').

    Uses the entrywise minimum over queries as the candidate kernel.  This
    is a sufficient construction only; failure means this particular
    witness does not exist, not that no minorization exists.
    """
    m = np.min(np.stack(net.P, axis=0), axis=0)
    row_sums = m.sum(axis=1)
    if np.any(row_sums <= 0.0):
        bad = int(np.argmin(row_sums))
        return MinorizationResult(
            False, reason=f"entrywise-minimum kernel has zero row sum at state {bad}"
        )
    theta = float(row_sums.min())
    p_tilde = m / row_sums[:, None]
    if not _strongly_connected(p_tilde > 0.0):
        return MinorizationResult(
            False, reason="entrywise-minimum kernel is not irreducible"
        )
    return MinorizationResult(True, theta=theta, p_tilde=p_tilde)


def _strongly_connected(adj):
    n = adj.shape[0]
    reach = adj | np.eye(n, dtype=bool)
    for _ in range(n):
        reach = reach | (reach @ reach)
    return bool(np.all(reach) and np.all(reach.T))


def stacked_observation_matrix(plant: PlantModel):
    """All C_{q,s} stacked vertically (detectability check input)."""
    rows = [plant.C[q][s] for q in range(plant.num_queries) for s in range(len(plant.C[q]))]
    return np.vstack(rows)


@dataclass
class ValidationReport:
    ok: bool
    errors: list = field(default_factory=list)
    warnings: list = field(default_factory=list)
    minorization: MinorizationResult | None = None


def validate_network(net: NetworkModel):
    errors = []
    N, Q = net.num_states, net.num_queries
    for q, p in enumerate(net.P):
        if p.shape != (N, N):
            errors.append(f"P[{q}] has shape {p.shape}, expected ({N}, {N})")
            continue
        if np.any(p < 0):
            errors.append(f"P[{q}] has negative entries")
        bad_rows = np.nonzero(np.abs(p.sum(axis=1) - 1.0) > 1e-12)[0]
        for s in bad_rows:
            errors.append(f"P[{q}] row {s} sums to {p[s].sum():.6g}")
    if net.loss.shape != (N, Q):
        errors.append(f"loss table has shape {net.loss.shape}, expected ({N}, {Q})")
    elif np.any(net.loss < 0) or np.any(net.loss >= 1.0):
        errors.append("loss rates must lie in [0, 1)")
    if net.net_cost.shape != (N, Q):
        errors.append(
            f"net_cost table has shape {net.net_cost.shape}, expected ({N}, {Q})"
        )
    else:
        per_state = net.net_cost.min(axis=1)
        if per_state[net.s_circ] > per_state.min() + 1e-12:
            errors.append(
                f"s_circ={net.s_circ} does not attain the minimum network cost"
            )
        if np.any(net.net_cost[net.s_circ] < 0):
            errors.append("net_cost at s_circ must be nonnegative")
    return errors


def validate(plant: PlantModel, net: NetworkModel) -> ValidationReport:
    """Check every standing model assumption; deterministic and pure.

    Hard violations go to `errors`; detectability of the stacked sensor
    matrix is reported as a warning only (necessary but not sufficient
    under intermittency), as is a failed minorization certificate.
    """
    errors = []
    warnings = []
    d = plant.dim

    if plant.A.shape != (d, d):
        errors.append(f"A has shape {plant.A.shape}, expected square")
    if plant.B.shape[0] != d:
        errors.append("B row count does not match state dimension")
    if plant.D.shape[0] != d:
        errors.append("D row count does not match state dimension")
    if plant.R.dim != d:
        errors.append("R dimension does not match state dimension")
    if plant.M.dim != plant.dim_u:
        errors.append("M dimension does not match control dimension")

    if min_eig(plant.R) <= 0:
        errors.append("R must be strictly positive definite")
    if min_eig(plant.M) <= 0:
        errors.append("M must be strictly positive definite")

    if len(plant.C) != net.num_queries or len(plant.F) != net.num_queries:
        errors.append("C/F query count does not match the network's query set")
    else:
        for q in range(net.num_queries):
            if len(plant.C[q]) != net.num_states or len(plant.F[q]) != net.num_states:
                errors.append(f"C[{q}]/F[{q}] must have one entry per network state")
                continue
            for s in range(net.num_states):
                Cqs, Fqs = plant.C[q][s], plant.F[q][s]
                if Cqs.shape[1] != d:
                    errors.append(f"C[{q}][{s}] column count != {d}")
                if Fqs.shape[1] != plant.dim_w:
                    errors.append(f"F[{q}][{s}] column count != {plant.dim_w}")
                if Cqs.shape[0] != Fqs.shape[0]:
                    errors.append(f"C[{q}][{s}] and F[{q}][{s}] row counts differ")
                    continue
                ff = Fqs @ Fqs.T
                if abs(np.linalg.det(ff)) < 1e-12:
                    errors.append(f"F[{q}][{s}] F^T is singular")
                if np.max(np.abs(plant.D @ Fqs.T)) > 1e-10:
                    errors.append(f"D F[{q}][{s}]^T != 0")

    ok_stab, failing = check_stabilizable(plant.A, plant.B)
    if not ok_stab:
        errors.append(f"(A, B) is not stabilizable; PBH fails at {failing}")
    if not check_controllable(plant.A, plant.D):
        errors.append("(A, D) is not controllable")

    errors.extend(validate_network(net))

    minorization = None
    if not errors:
        if not check_detectable(stacked_observation_matrix(plant), plant.A):
            warnings.append(
                "stacked (C, A) is not detectable; the estimation chain cannot "
                "be stable under any schedule"
            )
        minorization = check_minorization(net)
        if not minorization.success:
            warnings.append(
                f"minorization certificate not found: {minorization.reason}"
            )

    return ValidationReport(
        ok=not errors, errors=errors, warnings=warnings, minorization=minorization
    )


def require_valid(plant, net):
    report = validate(plant, net)
    if not report.ok:
        raise ModelError("; ".join(report.errors))
    return report
