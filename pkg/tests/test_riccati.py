"""Control Riccati equation: closed-form scalar oracles and recursions."""
import math

import numpy as np
import pytest

from lossysched import CovMatrix, finite_horizon_lqr, pi_tilde_of, riccati_map, solve_are
from lossysched.riccati import _gain

from .conftest import make_scalar_plant

# positive root of Pi^2 - 4 Pi - 1 = 0 (scalar a=2, b=1, R=M=1, alpha=1)
PI_STAR = 2.0 + math.sqrt(5.0)


class TestScalarClosedForms:
    def test_fixed_point_value(self, bench_plant):
        sol = solve_are(bench_plant, alpha=1.0)
        assert abs(float(sol.Pi.entries[0, 0]) - PI_STAR) < 1e-9

    def test_gain(self, bench_plant):
        sol = solve_are(bench_plant, alpha=1.0)
        # K* = 2 Pi / (1 + Pi), the golden ratio for this instance
        expect = 2.0 * PI_STAR / (1.0 + PI_STAR)
        assert float(sol.K[0, 0]) == pytest.approx(expect, abs=1e-9)
        assert float(sol.K[0, 0]) == pytest.approx((1 + math.sqrt(5)) / 2, abs=1e-9)

    def test_pi_tilde(self, bench_plant):
        sol = solve_are(bench_plant, alpha=1.0)
        # R - Pi + a^2 Pi = 1 + 3 Pi
        assert float(sol.Pi_tilde.entries[0, 0]) == pytest.approx(
            1.0 + 3.0 * PI_STAR, abs=1e-8
        )

    def test_map_closed_form(self, bench_plant):
        # scalar map: Pi -> 1 + 4 Pi - 4 Pi^2 / (1 + Pi) = (1 + 5 Pi) / (1 + Pi)
        for pi in (0.0, 1.0, 3.0, 10.0):
            out = riccati_map(bench_plant, 1.0, np.array([[pi]]))
            assert float(out[0, 0]) == pytest.approx((1 + 5 * pi) / (1 + pi), abs=1e-12)

    def test_residual_reported(self, bench_plant):
        sol = solve_are(bench_plant)
        assert sol.residual < 1e-9
        assert sol.iterations > 0


class TestStablePlant:
    def test_geometric_series(self):
        # a = 0.5, no input needed: Pi = 1 + 0.25 Pi = 4/3, K = 0
        plant = make_scalar_plant(a=0.5, b=0.0)
        sol = solve_are(plant, alpha=1.0)
        assert float(sol.Pi.entries[0, 0]) == pytest.approx(4.0 / 3.0, abs=1e-9)
        assert float(sol.K[0, 0]) == pytest.approx(0.0, abs=1e-12)

    def test_discounted_geometric_series(self):
        # alpha = 0.5, a = 0.5: Pi = 1 + 0.125 Pi = 8/7
        plant = make_scalar_plant(a=0.5, b=0.0)
        sol = solve_are(plant, alpha=0.5)
        assert float(sol.Pi.entries[0, 0]) == pytest.approx(8.0 / 7.0, abs=1e-9)


class TestFiniteHorizon:
    def test_one_step_terminal_zero(self, bench_plant):
        pis, gains = finite_horizon_lqr(bench_plant, 1.0, 1, np.zeros((1, 1)))
        assert float(pis[0].entries[0, 0]) == pytest.approx(1.0)  # just R
        assert float(gains[0][0, 0]) == pytest.approx(0.0)

    def test_terminal_at_fixed_point_is_time_invariant(self, bench_plant):
        pis, _ = finite_horizon_lqr(bench_plant, 1.0, 6, np.array([[PI_STAR]]))
        for p in pis:
            assert float(p.entries[0, 0]) == pytest.approx(PI_STAR, abs=1e-9)

    def test_two_step_hand_value(self, bench_plant):
        # one backward step from 0 gives R; a second gives the map of R
        pis, _ = finite_horizon_lqr(bench_plant, 1.0, 2, np.zeros((1, 1)))
        expect = (1 + 5 * 1.0) / (1 + 1.0)  # map applied to Pi = R = 1
        assert float(pis[0].entries[0, 0]) == pytest.approx(expect, abs=1e-12)

    def test_backward_recursion_converges_to_are(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((2, 2))
        a = 0.9 * a / max(abs(np.linalg.eigvals(a)))
        from lossysched import PlantModel

        plant = PlantModel(
            A=a,
            B=np.eye(2),
            D=np.hstack([np.eye(2), np.zeros((2, 2))]),
            R=CovMatrix.identity(2),
            M=CovMatrix(0.05 * np.eye(2)),
            C=((np.array([[1.0, 0.0]]),),),
            F=((np.array([[0.0, 0.0, 1.0, 0.0]]),),),
        )
        sol = solve_are(plant, alpha=1.0)
        pis, _ = finite_horizon_lqr(plant, 1.0, 400, np.zeros((2, 2)))
        np.testing.assert_allclose(pis[0].entries, sol.Pi.entries, atol=1e-8)

    def test_horizon_must_be_positive(self, bench_plant):
        with pytest.raises(ValueError):
            finite_horizon_lqr(bench_plant, 1.0, 0, np.zeros((1, 1)))


def test_alpha_range_enforced(bench_plant):
    with pytest.raises(ValueError):
        solve_are(bench_plant, alpha=0.0)
    with pytest.raises(ValueError):
        solve_are(bench_plant, alpha=1.5)


def test_gain_formula_consistent(bench_plant):
    sol = solve_are(bench_plant, alpha=1.0)
    np.testing.assert_allclose(sol.K, _gain(bench_plant, 1.0, sol.Pi.entries))


def test_pi_tilde_of_matches_decomposition(bench_plant):
    # Pi must equal R + A' Pi A - Pi_tilde... i.e. Pi_tilde = R - Pi + A' Pi A
    pi = np.array([[3.0]])
    out = pi_tilde_of(bench_plant, 1.0, pi)
    assert float(out[0, 0]) == pytest.approx(1.0 - 3.0 + 4.0 * 3.0)
