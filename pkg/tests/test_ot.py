"""Exact OT: plans, costs, the 1-D quantile route, monotonicity, gluing."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linear_sum_assignment

import wproj.errors as errors
from wproj.measures import GridMeasure, GridSpec, new_discrete
from wproj.ot import (
    QuantileFn,
    TransportPlan,
    check_cyclical_monotonicity,
    glue,
    plan_cost,
    quantile_of,
    solve_exact,
    translate_plan,
    wasserstein_1d,
)


def _rand_measure(rng, d, kmax=8):
    k = int(rng.integers(1, kmax + 1))
    return new_discrete(rng.normal(size=(k, d)), rng.random(k) + 0.05)


class TestSolveExact:
    def test_identity_plan(self):
        m = new_discrete([[0.0, 0.0], [1.0, 2.0]], [0.3, 0.7])
        plan = solve_exact(m, m, 2.0)
        assert plan_cost(plan, 2.0) == pytest.approx(0.0, abs=1e-15)

    def test_forced_plan_singleton(self):
        mu = new_discrete([[0.0, 0.0]], [1.0])
        nu = new_discrete([[1.0, 0.0], [0.0, 1.0]], [0.5, 0.5])
        plan = solve_exact(mu, nu, 2.0)
        assert plan_cost(plan, 2.0) == pytest.approx(1.0, rel=1e-12)

    def test_two_by_two_matching(self):
        # atoms far on the axis vs. tilted pair: enumerating both matchings
        # gives 3.25 for (2,0)->(0.5,1) and 7.25 for the swap
        mu = new_discrete([[2.0, 0.0], [-2.0, 0.0]], [0.5, 0.5])
        nu = new_discrete([[0.5, 1.0], [-0.5, -1.0]], [0.5, 0.5])
        plan = solve_exact(mu, nu, 2.0)
        assert plan_cost(plan, 2.0) == pytest.approx(3.25, rel=1e-12)
        pairs = {(int(i), int(j)) for i, j in zip(plan.i, plan.j)}
        assert pairs == {(0, 0), (1, 1)}

    def test_dim_mismatch(self):
        with pytest.raises(errors.DimMismatchError):
            solve_exact(new_discrete([[0.0]], [1.0]),
                        new_discrete([[0.0, 0.0]], [1.0]), 2.0)

    def test_size_limit(self):
        rng = np.random.default_rng(0)
        mu = new_discrete(rng.normal(size=(4000, 1)), np.full(4000, 1 / 4000))
        with pytest.raises(errors.SizeLimitError):
            solve_exact(mu, mu, 2.0)

    def test_marginals_and_monotonicity_random(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            mu = _rand_measure(rng, 2)
            nu = _rand_measure(rng, 2)
            plan = solve_exact(mu, nu, 2.0)
            ok, worst = check_cyclical_monotonicity(plan, 2.0, k=3,
                                                    trials=1000, seed=1)
            assert ok, worst

    def test_assignment_oracle(self):
        # uniform weights: OT reduces to assignment; cross-check Hungarian
        rng = np.random.default_rng(5)
        n = 60
        x = rng.normal(size=(n, 3))
        y = rng.normal(size=(n, 3))
        mu = new_discrete(x, np.full(n, 1.0 / n))
        nu = new_discrete(y, np.full(n, 1.0 / n))
        for p in (1.0, 1.5, 2.0):
            C = np.linalg.norm(x[:, None] - y[None], axis=2) ** p
            ri, cj = linear_sum_assignment(C)
            ref = C[ri, cj].sum() / n
            got = plan_cost(solve_exact(mu, nu, p), p)
            assert got == pytest.approx(ref, rel=1e-12)


class TestPlanCost:
    def test_forced_p3(self):
        mu = new_discrete([[0.0]], [1.0])
        nu = new_discrete([[1.0]], [1.0])
        plan = solve_exact(mu, nu, 3.0)
        assert plan_cost(plan, 3.0) == pytest.approx(1.0, rel=1e-14)


class TestWasserstein1d:
    def test_diracs(self):
        mu = new_discrete([[0.0]], [1.0])
        nu = new_discrete([[1.0]], [1.0])
        for p in (1.0, 1.5, 2.0, 3.0):
            assert wasserstein_1d(mu, nu, p) == pytest.approx(1.0, rel=1e-12)

    def test_translation_of_uniform(self):
        grid = GridSpec([0.0], [0.01], (100,))
        u01 = GridMeasure(grid, np.full(100, 0.01), capped=True)
        u12 = u01.translate([1.0])
        for p in (1.0, 1.7, 2.0, 3.0):
            assert wasserstein_1d(u01, u12, p) == pytest.approx(1.0, rel=1e-9)

    def test_split_vs_middle(self):
        mu = new_discrete([[0.0], [1.0]], [0.5, 0.5])
        nu = new_discrete([[0.5]], [1.0])
        assert wasserstein_1d(mu, nu, 2.0) == pytest.approx(0.5, rel=1e-12)

    def test_matches_simplex_invariant(self):
        rng = np.random.default_rng(3)
        for _ in range(25):
            mu = _rand_measure(rng, 1)
            nu = _rand_measure(rng, 1)
            p = float(rng.choice([1.0, 1.5, 2.0, 3.0]))
            exact = wasserstein_1d(mu, nu, p) ** p
            cost = plan_cost(solve_exact(mu, nu, p), p)
            assert cost == pytest.approx(exact, rel=1e-9, abs=1e-12)

    def test_quadrature_oracle_linear_segments(self):
        # piecewise-linear quantiles against numeric quadrature
        from scipy.integrate import quad

        q1 = QuantileFn.from_linear([0.0, 0.4, 1.0], [0.0, 0.2, 1.5])
        q2 = QuantileFn.from_linear([0.0, 0.7, 1.0], [-0.5, 0.9, 1.1])
        for p in (1.0, 1.5, 2.0, 2.5):
            ref = quad(lambda t: abs(float(q1(t)) - float(q2(t))) ** p,
                       0.0, 1.0, limit=200)[0]
            got = q1.lp_distance(q2, p) ** p
            assert got == pytest.approx(ref, rel=1e-8)

    @given(st.integers(0, 10_000))
    @settings(max_examples=60, deadline=None)
    def test_triangle_inequality(self, seed):
        rng = np.random.default_rng(seed)
        mu, nu, ka = (_rand_measure(rng, 1) for _ in range(3))
        p = float(rng.choice([1.0, 2.0, 3.0]))
        ab = wasserstein_1d(mu, nu, p)
        ac = wasserstein_1d(mu, ka, p)
        cb = wasserstein_1d(ka, nu, p)
        assert ab <= ac + cb + 1e-9


class TestTriangleInequalityNd:
    def test_random_triples(self):
        rng = np.random.default_rng(9)
        for _ in range(15):
            mu, nu, ka = (_rand_measure(rng, 2) for _ in range(3))
            p = float(rng.choice([1.0, 2.0]))
            w = lambda a, b: plan_cost(solve_exact(a, b, p), p) ** (1 / p)
            assert w(mu, nu) <= w(mu, ka) + w(ka, nu) + 1e-9


class TestCyclicalMonotonicity:
    def test_swapped_plan_fails(self):
        mu = new_discrete([[2.0, 0.0], [-2.0, 0.0]], [0.5, 0.5])
        nu = new_discrete([[0.5, 1.0], [-0.5, -1.0]], [0.5, 0.5])
        bad = TransportPlan(mu, nu, np.array([0, 1]), np.array([1, 0]),
                            np.array([0.5, 0.5]))
        assert plan_cost(bad, 2.0) == pytest.approx(7.25, rel=1e-12)
        ok, worst = check_cyclical_monotonicity(bad, 2.0, k=2, trials=500, seed=0)
        assert not ok
        assert worst == pytest.approx(8.0, rel=1e-9)  # 2 * (7.25 - 3.25)

    def test_single_target_vacuous(self):
        mu = new_discrete([[0.0], [1.0]], [0.5, 0.5])
        nu = new_discrete([[0.3]], [1.0])
        plan = solve_exact(mu, nu, 2.0)
        ok, worst = check_cyclical_monotonicity(plan, 2.0, k=3, trials=200, seed=0)
        assert ok and worst <= 1e-12


class TestTranslatePlan:
    def test_zero_shift(self):
        rng = np.random.default_rng(1)
        mu, nu = _rand_measure(rng, 2), _rand_measure(rng, 2)
        plan = solve_exact(mu, nu, 2.0)
        shifted = translate_plan(plan, [0.0, 0.0])
        assert plan_cost(shifted, 2.0) == pytest.approx(plan_cost(plan, 2.0))

    def test_algebraic_identity(self):
        # cost(translated plan) = cost - 2 h . sum m (x - y) + |h|^2
        rng = np.random.default_rng(2)
        mu, nu = _rand_measure(rng, 3), _rand_measure(rng, 3)
        plan = solve_exact(mu, nu, 2.0)
        h = np.array([0.2, -0.4, 0.1])
        lhs = plan_cost(translate_plan(plan, h), 2.0)
        disp = plan.mass @ plan.displacements()
        rhs = plan_cost(plan, 2.0) - 2.0 * disp @ h + h @ h
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_translated_plan_still_optimal(self):
        # re-solve oracle: optimality is preserved under target translation
        rng = np.random.default_rng(7)
        for _ in range(100):
            mu, nu = _rand_measure(rng, 2, 5), _rand_measure(rng, 2, 5)
            h = rng.normal(size=2)
            plan = solve_exact(mu, nu, 2.0)
            moved = translate_plan(plan, h)
            resolved = solve_exact(mu, nu.translate(h), 2.0)
            assert plan_cost(moved, 2.0) == pytest.approx(
                plan_cost(resolved, 2.0), rel=1e-9, abs=1e-12)


class TestGlue:
    def test_identity_glue_is_coupling(self):
        rng = np.random.default_rng(4)
        rho = _rand_measure(rng, 2, 6)
        eta = solve_exact(rho, rho, 2.0)  # identity plan
        a = solve_exact(rho, _rand_measure(rng, 2, 5), 2.0)
        gamma = glue(eta, a, a)
        assert gamma.source is a.target and gamma.target is a.target

    def test_map_composition(self):
        # all three plans induced by maps: gamma is the composed map plan
        rho = new_discrete([[0.0], [1.0]], [0.5, 0.5])
        sig = new_discrete([[0.5], [2.0]], [0.5, 0.5])
        mu = new_discrete([[-1.0], [3.0]], [0.5, 0.5])
        nu = new_discrete([[10.0], [20.0]], [0.5, 0.5])
        ij = np.array([0, 1])
        half = np.array([0.5, 0.5])
        eta = TransportPlan(rho, sig, ij, ij, half)
        a = TransportPlan(rho, mu, ij, ij, half)
        b = TransportPlan(sig, nu, ij, ij, half)
        gamma = glue(eta, a, b)
        assert {(int(i), int(j)) for i, j in zip(gamma.i, gamma.j)} == {(0, 0), (1, 1)}
        assert np.allclose(gamma.mass, 0.5)

    def test_marginals_random(self):
        # direct-summation oracle: glued marginals match within 1e-9
        rng = np.random.default_rng(11)
        for _ in range(20):
            rho = _rand_measure(rng, 2, 6)
            sig = _rand_measure(rng, 2, 6)
            mu = _rand_measure(rng, 2, 6)
            nu = _rand_measure(rng, 2, 6)
            eta = solve_exact(rho, sig, 2.0)
            a = solve_exact(rho, mu, 2.0)
            b = solve_exact(sig, nu, 2.0)
            gamma = glue(eta, a, b)  # TransportPlan validates marginals
            assert gamma.source is mu and gamma.target is nu

    def test_marginal_mismatch_raises(self):
        rng = np.random.default_rng(12)
        rho, sig = _rand_measure(rng, 2, 4), _rand_measure(rng, 2, 4)
        other = _rand_measure(rng, 2, 4)
        eta = solve_exact(rho, sig, 2.0)
        a = solve_exact(other, rho, 2.0)
        with pytest.raises(errors.MarginalMismatchError):
            glue(eta, a, a)


class TestQuantileFn:
    def test_step_eval(self):
        q = quantile_of(new_discrete([[0.0], [1.0]], [0.5, 0.5]))
        assert q(0.25) == 0.0
        assert q(0.75) == 1.0

    def test_cdf_inverts(self):
        q = QuantileFn.from_linear([0.0, 1.0], [2.0, 4.0])
        xs = np.array([2.0, 2.5, 3.0, 4.0])
        assert np.allclose(q.cdf(xs), [0.0, 0.25, 0.5, 1.0])

    def test_nondecreasing_required(self):
        with pytest.raises(errors.InvalidSpecError):
            QuantileFn.from_step([0.0, 0.5, 1.0], [1.0, 0.0])
