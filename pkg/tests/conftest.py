"""Shared model instances used across the test suite.

Scalar plants embed the process and measurement noises in a joint
2-vector w, with D = [d, 0] and F = [0, f], so the orthogonality
requirement D F^T = 0 holds while the covariance recursions match the
familiar scalar forms with noise variances d^2 and f^2.
"""
from __future__ import annotations

import numpy as np
import pytest

from lossysched import CovMatrix, NetworkModel, PlantModel


def make_scalar_plant(a=2.0, b=1.0, d=1.0, f_values=(1.0,), r=1.0, m=1.0):
    """Scalar plant with one sensor per entry of f_values, shared net state."""
    C = tuple((np.array([[1.0]]),) for _ in f_values)
    F = tuple((np.array([[0.0, float(f)]]),) for f in f_values)
    return PlantModel(
        A=np.array([[float(a)]]),
        B=np.array([[float(b)]]),
        D=np.array([[float(d), 0.0]]),
        R=CovMatrix([[float(r)]]),
        M=CovMatrix([[float(m)]]),
        C=C,
        F=F,
    )


def make_single_state_net(loss_rates, net_costs=None, s_circ=0):
    """Degenerate one-state network with the given per-query loss rates."""
    loss = np.asarray(loss_rates, dtype=float).reshape(1, -1)
    q = loss.shape[1]
    if net_costs is None:
        net_costs = np.zeros((1, q))
    return NetworkModel(
        P=tuple(np.ones((1, 1)) for _ in range(q)),
        loss=loss,
        net_cost=np.asarray(net_costs, dtype=float).reshape(1, q),
        s_circ=s_circ,
    )


def make_diagonal_plant(a=2.0, n_sub=2):
    """Diagonal plant: n_sub unstable scalar subsystems, one sensor each.

    Joint noise w has one process component and one measurement component
    per subsystem, keeping D F^T = 0 with unit noise gains throughout.
    """
    dim = n_sub
    dim_w = 2 * n_sub
    D = np.zeros((dim, dim_w))
    D[:, :n_sub] = np.eye(n_sub)
    C = []
    F = []
    for q in range(n_sub):
        c = np.zeros((1, dim))
        c[0, q] = 1.0
        f = np.zeros((1, dim_w))
        f[0, n_sub + q] = 1.0
        C.append((c,))
        F.append((f,))
    return PlantModel(
        A=float(a) * np.eye(dim),
        B=np.eye(dim),
        D=D,
        R=CovMatrix.identity(dim),
        M=CovMatrix.identity(dim),
        C=tuple(C),
        F=tuple(F),
    )


@pytest.fixture(scope="session")
def bench_plant():
    """Scalar two-sensor benchmark plant: a=2, sensors f=1 and f=1.5."""
    return make_scalar_plant(f_values=(1.0, 1.5))


@pytest.fixture(scope="session")
def bench_net():
    """Benchmark network: one state, loss (0.10, 0.15), cost (1.0, 0.5)."""
    return make_single_state_net([0.10, 0.15], net_costs=[1.0, 0.5])


@pytest.fixture(scope="session")
def probe_plant():
    """Scalar single-sensor plant for stability probing (a=2)."""
    return make_scalar_plant(f_values=(1.0,))


@pytest.fixture(scope="session")
def diag_plant():
    """Two identical unstable subsystems with one dedicated sensor each."""
    return make_diagonal_plant(a=2.0, n_sub=2)


BENCH_CONFIG = {
    "plant": {
        "A": [[2.0]],
        "B": [[1.0]],
        "D": [[1.0, 0.0]],
        "R": [[1.0]],
        "M": [[1.0]],
        "C": [[[[1.0]]], [[[1.0]]]],
        "F": [[[[0.0, 1.0]]], [[[0.0, 1.5]]]],
    },
    "network": {
        "N": 1,
        "queries": 2,
        "lambda": [[0.10, 0.15]],
        "net_cost": [[1.0, 0.5]],
    },
    "solver": {"dedup_tol": 1e-3, "max_states": 20000, "tol": 1e-8},
    "sim": {"T": 500, "replications": 3, "base_seed": 7},
}
