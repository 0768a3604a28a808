import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cfmimo.qcsolve import (
    BisectionSettings, BracketError, FeasibilityResult, LinearFeasibility, bisect_maxmin,
    feasible, max_iterations,
)


def threshold_oracle(th):
    return lambda t: (t <= th, np.array([t]))


class TestFeasible:
    def test_interval(self):
        p = LinearFeasibility(1)
        p.add_row([1.0], 0.5, ">=")
        p.add_row([1.0], 1.0, "<=")
        r = feasible(p)
        assert r.feasible and 0.5 - 1e-8 <= r.x[0] <= 1.0

    def test_outside_box(self):
        p = LinearFeasibility(1)
        p.add_row([1.0], 2.0, ">=")
        assert feasible(p).status == "infeasible"

    def test_no_rows_midpoint(self):
        r = feasible(LinearFeasibility(3, lb=0.0, ub=[1.0, 2.0, 4.0]))
        assert r.feasible and np.allclose(r.x, [0.5, 1.0, 2.0])

    def test_witness_meets_rows(self, rng):
        for _ in range(20):
            A = rng.normal(size=(30, 50))
            x0 = rng.uniform(0, 1, 50)
            b = A @ x0 - rng.uniform(0, 0.1, 30)
            r = feasible(LinearFeasibility(50, A, b))
            assert r.feasible and LinearFeasibility(50, A, b).violation(r.x) <= 1e-8

    def test_cost_selects_point(self):
        p = LinearFeasibility(2, A=[[1.0, 1.0]], b=[1.0], cost=[1.0, 2.0])
        assert np.allclose(feasible(p).x, [1.0, 0.0])

    def test_rejects_bad_input(self):
        with pytest.raises(ValueError):
            LinearFeasibility(2, A=[[1.0, np.inf]], b=[0.0])
        with pytest.raises(ValueError):
            LinearFeasibility(2, lb=[0, 2], ub=[1, 1])
        with pytest.raises(ValueError):
            LinearFeasibility(2, A=[[1.0, 1.0, 1.0]], b=[0.0])

    def test_agrees_with_rejection_sampling(self):
        rng = np.random.default_rng(7)
        pts = rng.uniform(0, 1, (1_000_000, 3))
        agree = 0
        for _ in range(30):
            A = rng.normal(size=(4, 3))
            b = rng.normal(scale=0.6, size=4)
            hit = bool(np.any(np.all(pts @ A.T >= b, axis=1)))
            got = feasible(LinearFeasibility(3, A, b)).feasible
            if hit:
                assert got  # a sampled point is a certificate
            agree += hit == got
        # a feasible set too thin to be hit by 1e6 samples is possible but rare
        assert agree >= 29


class TestBisection:
    def test_threshold(self):
        r = bisect_maxmin(threshold_oracle(3.0), BisectionSettings(0.0, 10.0, rel_tol=1e-6))
        assert 3.0 - 3e-6 <= r.t_star <= 3.0 and not r.saturated

    def test_saturated(self):
        r = bisect_maxmin(threshold_oracle(3.0), BisectionSettings(0.0, 0.5))
        assert r.saturated and r.t_star == 0.5

    def test_bracket_too_high(self):
        with pytest.raises(BracketError, match="bracket too high"):
            bisect_maxmin(threshold_oracle(3.0), BisectionSettings(4.0, 10.0))

    def test_iteration_count(self):
        s = BisectionSettings(0.0, 10.0, rel_tol=1e-12, abs_tol=1e-6)
        r = bisect_maxmin(threshold_oracle(math.pi), s)
        assert r.iterations <= max_iterations(s) == math.ceil(math.log2(10 / 1e-6))

    def test_invalid_settings(self):
        with pytest.raises(ValueError):
            BisectionSettings(1.0, 1.0)
        with pytest.raises(ValueError):
            BisectionSettings(0.0, 1.0, rel_tol=0.0)

    def test_linear_oracle_witness_reverifies(self):
        # max t s.t. x >= t, x <= 0.7 within [0, 1]
        def oracle(t):
            return LinearFeasibility(1, A=[[1.0], [1.0]], b=[t, 0.7], sense=[1, -1])
        r = bisect_maxmin(oracle, BisectionSettings(0.0, 1.0, rel_tol=1e-9))
        assert r.t_star == pytest.approx(0.7, abs=1e-8)
        assert oracle(r.t_star).violation(r.witness) <= 1e-8

    def test_feasibility_result_oracle(self):
        oracle = lambda t: FeasibilityResult("feasible" if t < 2 else "infeasible", np.zeros(1))  # noqa: E731
        r = bisect_maxmin(oracle, BisectionSettings(0.0, 5.0, rel_tol=1e-8))
        assert r.t_star == pytest.approx(2.0, abs=1e-7)

    @settings(max_examples=100, deadline=None)
    @given(th=st.floats(0.01, 99.0), rel=st.sampled_from([1e-3, 1e-5, 1e-8]))
    def test_property_threshold(self, th, rel):
        r = bisect_maxmin(threshold_oracle(th), BisectionSettings(0.0, 100.0, rel_tol=rel))
        assert r.t_star <= th
        assert th - r.t_star <= max(1e-9, rel * 100.0) + 1e-12
