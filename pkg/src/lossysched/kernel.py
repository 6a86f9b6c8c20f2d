"""Covariance dynamics and the controlled transition kernel.

The error covariance evolves by the time update Xi (no measurement) or the
full Kalman update T_q (measurement received).  The one-step kernel under
query q is a finite mixture over network successors and the received/lost
branches; DP sweeps enumerate it exactly, only the simulator samples it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SingularMatrixError
from .psd import CovMatrix, as_matrix, symmetrize, sym_solve_spd

PRUNE_TOL = 1e-15
JOSEPH_AGREEMENT_TOL = 1e-8


def xi_mat(plant, sigma):
    """Time update D D^T + A Sigma A^T on raw arrays."""
    s = as_matrix(sigma)
    return symmetrize(plant.D @ plant.D.T + plant.A @ s @ plant.A.T)


def xi(plant, sigma):
    return CovMatrix(xi_mat(plant, sigma), check=False)


def kalman_gain(plant, q, s, xi_sigma):
    """Gain Xi C^T (C Xi C^T + F F^T)^{-1} for a received observation."""
    C = plant.C[q][s]
    F = plant.F[q][s]
    innov = C @ xi_sigma @ C.T + F @ F.T
    try:
        # solve innov^T X = (Xi C^T)^T  =>  X = innov^{-1} C Xi
        gain_t = sym_solve_spd(innov, C @ xi_sigma)
    except SingularMatrixError as exc:
        raise SingularMatrixError(
            f"innovation covariance singular for query {q}, state {s}"
        ) from exc
    return gain_t.T


def t_q_mat(plant, q, s, sigma, xs=None, gain=None):
    """Measurement update on raw arrays; returns the Joseph form.

    Computes both the subtractive form Xi - K C Xi and the Joseph form
    (I - KC) Xi (I - KC)^T + K F F^T K^T and asserts they agree; the
    Joseph form is returned because it stays PSD under roundoff.  The
    time update and gain may be passed in when already computed.
    """
    if xs is None:
        xs = xi_mat(plant, sigma)
    K = kalman_gain(plant, q, s, xs) if gain is None else gain
    C = plant.C[q][s]
    F = plant.F[q][s]
    ikc = np.eye(plant.dim) - K @ C
    joseph = symmetrize(ikc @ xs @ ikc.T + K @ (F @ F.T) @ K.T)
    subtractive = symmetrize(xs - K @ C @ xs)
    if np.max(np.abs(joseph - subtractive)) > JOSEPH_AGREEMENT_TOL * (
        1.0 + np.max(np.abs(joseph))
    ):
        raise AssertionError(
            "Joseph and subtractive covariance updates disagree beyond tolerance"
        )
    return joseph


def t_q(plant, q, s, sigma, xs=None, gain=None):
    return CovMatrix(t_q_mat(plant, q, s, sigma, xs=xs, gain=gain), check=False)


@dataclass(frozen=True)
class KernelBranch:
    next_net_state: int
    probability: float
    next_cov: CovMatrix
    received: bool


def branches(plant, net, s, sigma, q):
    """Exact enumeration of the one-step kernel from (s, sigma) under q.

    At most 2N branches: for each successor network state, a received
    branch carrying T_q(sigma) and a lost branch carrying Xi(sigma).
    Branches below the pruning probability are dropped.
    """
    lam = float(net.loss[s, q])
    row = net.P[q][s]
    cov_hit = None
    cov_miss = None
    out = []
    for s_next, p in enumerate(row):
        p_hit = p * (1.0 - lam)
        p_miss = p * lam
        if p_hit >= PRUNE_TOL:
            if cov_hit is None:
                cov_hit = t_q(plant, q, s, sigma)
            out.append(KernelBranch(s_next, p_hit, cov_hit, True))
        if p_miss >= PRUNE_TOL:
            if cov_miss is None:
                cov_miss = xi(plant, sigma)
            out.append(KernelBranch(s_next, p_miss, cov_miss, False))
    return out


def apply_kernel(f, plant, net, s, sigma, q):
    """Expectation of f(S', Sigma') over the exact branch mixture."""
    return sum(
        b.probability * f(b.next_net_state, b.next_cov)
        for b in branches(plant, net, s, sigma, q)
    )


def step_filter(plant, net, q, s, x_hat, pi_hat, u, gamma, y=None):
    """One filter step given the realized outcome (gamma, y).

    The caller supplies the control u (typically -K x_hat).  With a lost
    observation the predictor runs open loop and the covariance takes the
    time update; otherwise the gain corrects against the innovation.
    """
    x_hat = np.asarray(x_hat, dtype=float)
    pred = plant.A @ x_hat + plant.B @ np.asarray(u, dtype=float)
    if not gamma:
        if y is not None:
            raise ValueError("observation supplied but gamma = 0")
        return pred, xi(plant, pi_hat)
    if y is None:
        raise ValueError("gamma = 1 requires an observation")
    y = np.asarray(y, dtype=float)
    C = plant.C[q][s]
    if y.shape[0] != C.shape[0]:
        raise DimensionError(
            f"observation has dimension {y.shape[0]}, expected {C.shape[0]}"
        )
    xs = xi_mat(plant, pi_hat)
    K = kalman_gain(plant, q, s, xs)
    x_new = pred + K @ (y - C @ pred)
    return x_new, t_q(plant, q, s, pi_hat, xs=xs, gain=K)
