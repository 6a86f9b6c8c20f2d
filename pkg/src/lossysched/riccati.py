"""Control-side Riccati recursions and algebraic equations.

The backward recursion yields the finite-horizon feedback gains; its fixed
point defines the stationary gain K and the weight matrix Pi_tilde that
prices the error covariance inside the scheduling running cost.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .psd import CovMatrix, symmetrize, sym_solve_spd

MAX_ITER = 100_000
RESIDUAL_RTOL = 1e-10


@dataclass(frozen=True)
class RiccatiSolution:
    Pi: CovMatrix
    Pi_tilde: CovMatrix
    K: np.ndarray
    alpha: float
    iterations: int
    residual: float


def riccati_map(plant, alpha, Pi):
    """One application of the discounted Riccati operator."""
    A, B, R, M = plant.A, plant.B, plant.R.entries, plant.M.entries
    Pi = np.asarray(Pi, dtype=float)
    BtPi = B.T @ Pi
    gain = sym_solve_spd(M + alpha * BtPi @ B, BtPi @ A)  # (M + a B'PB)^{-1} B'PA
    return symmetrize(R + alpha * A.T @ Pi @ A - alpha**2 * A.T @ Pi @ B @ gain)


def _gain(plant, alpha, Pi):
    A, B, M = plant.A, plant.B, plant.M.entries
    BtPi = B.T @ np.asarray(Pi, dtype=float)
    return alpha * sym_solve_spd(M + alpha * BtPi @ B, BtPi @ A)


def pi_tilde_of(plant, alpha, Pi):
    A, R = plant.A, plant.R.entries
    Pi = np.asarray(Pi, dtype=float)
    return symmetrize(R - Pi + alpha * A.T @ Pi @ A)


def finite_horizon_lqr(plant, alpha, horizon, Pi_fin):
    """Backward recursion for the time-varying LQR weights and gains.

    Returns (pis, gains): pis[t] for t = 0..horizon with
    pis[horizon] = Pi_fin; gains[t] for t = 0..horizon-1.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    pis = [None] * (horizon + 1)
    gains = [None] * horizon
    pis[horizon] = CovMatrix(np.asarray(Pi_fin, dtype=float))
    for t in range(horizon - 1, -1, -1):
        nxt = pis[t + 1].entries
        K = _gain(plant, alpha, nxt)
        A, B, R = plant.A, plant.B, plant.R.entries
        Pi = symmetrize(R + alpha * A.T @ nxt @ A - alpha * A.T @ nxt @ B @ K)
        pis[t] = CovMatrix(Pi)
        gains[t] = K
    return pis, gains


def solve_are(plant, alpha=1.0) -> RiccatiSolution:
    """Fixed-point iteration for the (discounted) algebraic Riccati equation.

    Starts from Pi = R (keeps every inverse well conditioned) and iterates
    the Riccati map until the relative Frobenius residual drops below
    1e-10.  Requires (A, B) stabilizable for the fixed point to exist.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError("alpha must lie in (0, 1]")
    Pi = plant.R.entries.copy()
    residual = np.inf
    for it in range(1, MAX_ITER + 1):
        nxt = riccati_map(plant, alpha, Pi)
        residual = float(np.linalg.norm(nxt - Pi))
        Pi = nxt
        if residual <= RESIDUAL_RTOL * (1.0 + float(np.linalg.norm(Pi))):
            break
    else:
        raise ConvergenceError(
            f"Riccati iteration did not converge in {MAX_ITER} iterations",
            residual=residual,
        )
    K = _gain(plant, alpha, Pi)
    return RiccatiSolution(
        Pi=CovMatrix(Pi),
        Pi_tilde=CovMatrix(pi_tilde_of(plant, alpha, Pi)),
        K=K,
        alpha=alpha,
        iterations=it,
        residual=residual,
    )
