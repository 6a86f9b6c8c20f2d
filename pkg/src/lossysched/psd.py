"""Dense symmetric-matrix arithmetic on the positive-semidefinite cone.

Everything downstream (filter updates, Riccati iterations, Bellman sweeps)
manipulates small dense error-covariance matrices.  This module owns the
covariance wrapper type, the Loewner partial order, and the SPD solves.
"""
from __future__ import annotations

import enum

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericalError, SingularMatrixError

SYM_RTOL = 1e-12
# Covariance updates repeatedly subtract near-equal PSD terms, producing
# harmless negative eigenvalues at roundoff scale; tolerate them relative
# to the trace.
PSD_RTOL = 1e-9


class Order(enum.Enum):
    LESS_EQ = "less_eq"
    GREATER_EQ = "greater_eq"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"


def symmetrize(m):
    return 0.5 * (m + m.T)


class CovMatrix:
    """Symmetric positive-semidefinite matrix (an error covariance).

    Construction symmetrizes via (M + M^T)/2 and verifies both the
    symmetry of the input and PSD-ness up to a relative tolerance.
    Instances are immutable; the underlying array is write-locked.
    """

    __slots__ = ("entries",)

    def __init__(self, entries, check=True):
        m = np.asarray(entries, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise NumericalError("covariance matrix has non-finite entries")
        if check:
            asym = np.abs(m - m.T)
            bound = SYM_RTOL * (1.0 + np.abs(m))
            if np.any(asym > bound):
                raise ModelSymmetryError(m)
        sym = symmetrize(m)
        if check and sym.shape[0] > 0:
            lo = float(np.linalg.eigvalsh(sym)[0])
            tr = float(np.trace(sym))
            if lo < -PSD_RTOL * max(tr, 1.0):
                raise NumericalError(
                    f"matrix is not PSD: min eigenvalue {lo:.3e}, trace {tr:.3e}"
                )
        sym.setflags(write=False)
        object.__setattr__(self, "entries", sym)

    def __setattr__(self, name, value):
        raise AttributeError("CovMatrix is immutable")

    @property
    def dim(self):
        return self.entries.shape[0]

    @classmethod
    def zero(cls, d):
        return cls(np.zeros((d, d)), check=False)

    @classmethod
    def identity(cls, d):
        return cls(np.eye(d), check=False)

    @classmethod
    def diag(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)), check=False)

    def trace(self):
        return float(np.trace(self.entries))

    def __array__(self, dtype=None, copy=None):
        return np.array(self.entries, dtype=dtype)

    def __eq__(self, other):
        return isinstance(other, CovMatrix) and np.array_equal(
            self.entries, other.entries
        )

    def __hash__(self):
        return hash(self.entries.tobytes())

    def __repr__(self):
        return f"CovMatrix({self.entries.tolist()!r})"


def ModelSymmetryError(m):  # small helper to keep the constructor readable
    return NumericalError(
        "matrix is not symmetric within tolerance: max asymmetry "
        f"{float(np.max(np.abs(m - m.T))):.3e}"
    )


def as_matrix(a):
    """Accept a CovMatrix or a raw array; return the ndarray view."""
    if isinstance(a, CovMatrix):
        return a.entries
    return np.asarray(a, dtype=float)


def min_eig(a):
    """Smallest eigenvalue via the symmetric eigensolver."""
    m = as_matrix(a)
    if not np.all(np.isfinite(m)):
        raise NumericalError("non-finite entries")
    if m.shape == (1, 1):
        return float(m[0, 0])
    return float(np.linalg.eigvalsh(symmetrize(m))[0])


def max_eig(a):
    m = as_matrix(a)
    if not np.all(np.isfinite(m)):
        raise NumericalError("non-finite entries")
    return float(np.linalg.eigvalsh(symmetrize(m))[-1])


def psd_order(a, b, tol=0.0):
    """Loewner order between two covariances: a <= b iff b - a is PSD.

    `tol` is an absolute slack on the smallest eigenvalue of the
    difference (useful when comparing results of inexact recursions).
    """
    am, bm = as_matrix(a), as_matrix(b)
    if am.shape != bm.shape:
        raise DimensionError(f"dimension mismatch: {am.shape} vs {bm.shape}")
    le = min_eig(bm - am) >= -tol
    ge = min_eig(am - bm) >= -tol
    if le and ge:
        return Order.EQUAL
    if le:
        return Order.LESS_EQ
    if ge:
        return Order.GREATER_EQ
    return Order.INCOMPARABLE


def sym_solve_spd(a, rhs):
    """Solve a @ x = rhs for strictly positive definite a (Cholesky).

    Raises SingularMatrixError if a is numerically singular or indefinite.
    """
    am = as_matrix(a)
    rhs = np.asarray(rhs, dtype=float)
    try:
        c, low = scipy.linalg.cho_factor(symmetrize(am), check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularMatrixError(
            f"matrix is not strictly positive definite; cannot solve: {exc}"
        ) from exc
    diag = np.abs(np.diagonal(c))
    if diag.min() <= 1e-12 * max(diag.max(), 1.0):
        raise SingularMatrixError(
            "matrix is numerically singular; Cholesky pivot underflow"
        )
    return scipy.linalg.cho_solve((c, low), rhs, check_finite=False)


def random_psd(rng, d, scale=1.0):
    """Random PSD matrix G G^T; test/benchmark helper."""
    g = rng.standard_normal((d, d))
    return CovMatrix(scale * g @ g.T, check=False)
