"""1-D projection: sampled pipeline, oracle agreement, exact block route."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import wproj.errors as errors
from wproj._kernels import isotonic_fit
from wproj.measures import GridMeasure, GridSpec, new_discrete
from wproj.ot import quantile_of, wasserstein_1d
from wproj.proj1d import (
    ProjectionSpec1D,
    brute_force_projection_oracle,
    kkt_certificate,
    project_discrete_exact,
    project_measure_1d,
    project_quantile,
)


def _rand_monotone(rng, n, scale=2.0):
    return np.sort(rng.normal(size=n)) * scale


def _sampled(q, spec):
    ti = (np.arange(spec.n) + 0.5) / spec.n
    return q(ti)


class TestSpec:
    def test_rejects_p1(self):
        with pytest.raises(errors.InvalidSpecError):
            ProjectionSpec1D(p=1.0)

    def test_rejects_tiny_n(self):
        with pytest.raises(errors.InvalidSpecError):
            ProjectionSpec1D(n=1)


class TestProjectQuantile:
    def test_uniform_fixed_point(self):
        grid = GridSpec([0.0], [0.01], (100,))
        u01 = GridMeasure(grid, np.full(100, 0.01), capped=True)
        spec = ProjectionSpec1D(2.0, 1.0, 128)
        proj = project_quantile(quantile_of(u01), spec)
        tt = np.linspace(0, 1, 33)
        assert np.abs(proj(tt) - tt).max() < 1e-12

    def test_dirac_spreads_uniform(self):
        spec = ProjectionSpec1D(2.0, 1.0, 64)
        proj = project_quantile(quantile_of(new_discrete([[0.0]], [1.0])), spec)
        tt = np.linspace(0, 1, 17)
        assert np.abs(proj(tt) - (tt - 0.5)).max() < 1e-12

    def test_compressed_uniform(self):
        # density 2 on [0, 1/2] projects to uniform on [-1/4, 3/4]
        grid = GridSpec([0.0], [0.005], (100,))
        dense = GridMeasure(grid, np.full(100, 0.01), lam=2.0, capped=True)
        spec = ProjectionSpec1D(2.0, 1.0, 512)
        proj = project_quantile(quantile_of(dense), spec)
        tt = np.linspace(0, 1, 9)
        assert np.abs(proj(tt) - (tt - 0.25)).max() < 1e-3

    def test_feasibility(self):
        rng = np.random.default_rng(0)
        for lam in (0.5, 1.0, 2.0):
            spec = ProjectionSpec1D(2.0, lam, 256)
            mu = new_discrete(rng.normal(size=(6, 1)), rng.random(6) + 0.1)
            proj = project_quantile(quantile_of(mu), spec)
            assert proj.min_slope() >= 1.0 / lam - 1e-9

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        spec = ProjectionSpec1D(2.0, 1.0, 200)
        for _ in range(10):
            mu = new_discrete(rng.normal(size=(5, 1)), rng.random(5) + 0.1)
            once = project_quantile(quantile_of(mu), spec)
            twice = project_quantile(once, spec)
            ti = (np.arange(spec.n) + 0.5) / spec.n
            assert np.abs(once(ti) - twice(ti)).max() <= 1e-9

    def test_kkt_certificate(self):
        rng = np.random.default_rng(2)
        spec = ProjectionSpec1D(2.0, 1.0, 64)
        for _ in range(20):
            q = _rand_monotone(rng, spec.n)
            qf = project_quantile(
                quantile_of(new_discrete(q[:, None], np.full(spec.n, 1.0))),
                spec)
            ti = (np.arange(spec.n) + 0.5) / spec.n
            x = qf(ti)
            cert = kkt_certificate(q, x, 1.0, tol=1e-7)
            assert cert["ok"], cert

    def test_mean_preserved(self):
        rng = np.random.default_rng(3)
        spec = ProjectionSpec1D(2.0, 1.0, 128)
        for _ in range(30):
            q = _rand_monotone(rng, spec.n)
            ti = (np.arange(spec.n) + 0.5) / spec.n
            shift = np.arange(spec.n) / spec.n
            y = isotonic_fit(q - shift, np.full(spec.n, 1.0 / spec.n), 2.0)
            x = y + shift
            assert abs(x.mean() - q.mean()) <= 1e-9

    @given(st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_sampled_nonexpansiveness(self, seed):
        # the literal 1-D statement: the sampled projection is a convex
        # projection in (scaled) l2, so it contracts exactly
        rng = np.random.default_rng(seed)
        n = 64
        q1 = _rand_monotone(rng, n)
        q2 = _rand_monotone(rng, n)
        w = np.full(n, 1.0 / n)
        shift = np.arange(n) / n
        x1 = isotonic_fit(q1 - shift, w, 2.0) + shift
        x2 = isotonic_fit(q2 - shift, w, 2.0) + shift
        assert np.linalg.norm(x1 - x2) <= np.linalg.norm(q1 - q2) + 1e-9


class TestOracle:
    def test_feasible_point_fixed(self):
        q = np.arange(8) / 8.0
        x = brute_force_projection_oracle(q, 2.0, 1.0, iters=50_000)
        assert np.abs(x - q).max() < 1e-10

    def test_closed_form_n4(self):
        x = brute_force_projection_oracle(np.zeros(4), 2.0, 1.0, iters=300_000)
        assert np.abs(x - np.array([-3, -1, 1, 3]) / 8.0).max() < 1e-7

    def test_size_limit(self):
        with pytest.raises(errors.SizeLimitError):
            brute_force_projection_oracle(np.zeros(26), 2.0)

    @pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
    def test_matches_pava(self, p):
        rng = np.random.default_rng(4)
        for _ in range(10):
            n = int(rng.integers(4, 26))
            q = _rand_monotone(rng, n, scale=1.0)
            x_oracle = brute_force_projection_oracle(q, p, 1.0)
            shift = np.arange(n) / n
            x_pava = isotonic_fit(q - shift, np.full(n, 1.0 / n), p) + shift
            assert np.abs(x_oracle - x_pava).max() < 1e-6


class TestProjectMeasure:
    def test_dirac_to_uniform_grid(self):
        spec = ProjectionSpec1D(2.0, 1.0, 256)
        out = project_measure_1d(new_discrete([[0.0]], [1.0]), spec, cells=64)
        assert out.max_density() <= 1.0 + 1e-9
        assert abs(out.barycenter()[0]) < 1e-9
        lo = out.grid.origin[0]
        hi = out.grid.upper[0]
        assert lo == pytest.approx(-0.5, abs=1e-9)
        assert hi == pytest.approx(0.5, abs=1e-6)

    def test_barycenter_preserved_random(self):
        # the sampled pipeline preserves the mean up to interpolation error
        rng = np.random.default_rng(5)
        spec = ProjectionSpec1D(2.0, 1.0, 4096)
        for _ in range(15):
            mu = new_discrete(rng.normal(size=(4, 1)), rng.random(4) + 0.1)
            out = project_measure_1d(mu, spec, cells=2048)
            assert abs(out.barycenter()[0] - mu.barycenter()[0]) < 2e-3


class TestExactBlocks:
    def test_dirac(self):
        q = project_discrete_exact(new_discrete([[0.0]], [1.0]), 1.0)
        tt = np.linspace(0, 1, 9)
        assert np.abs(q(tt) - (tt - 0.5)).max() < 1e-14

    def test_two_far_atoms_stay_apart(self):
        mu = new_discrete([[0.0], [10.0]], [0.5, 0.5])
        q = project_discrete_exact(mu, 1.0)
        # two disjoint blocks of length 1/2 centered on the atoms
        assert q.nseg == 2
        assert q(0.0) == pytest.approx(-0.25, abs=1e-12)
        assert q(0.25) == pytest.approx(0.0, abs=1e-12)
        assert q(0.75) == pytest.approx(10.0, abs=1e-12)
        assert q(1.0) == pytest.approx(10.25, abs=1e-12)

    def test_close_atoms_merge(self):
        mu = new_discrete([[0.0], [0.01]], [0.5, 0.5])
        q = project_discrete_exact(mu, 1.0)
        # merged block of length 1: slope 1 throughout, mean preserved
        assert q.nseg == 1
        assert q.mean() == pytest.approx(0.005, abs=1e-12)

    def test_mean_preserved_exactly(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            k = int(rng.integers(1, 10))
            mu = new_discrete(rng.normal(size=(k, 1)) * 3,
                              rng.random(k) + 0.05)
            lam = float(rng.choice([0.5, 1.0, 2.0]))
            q = project_discrete_exact(mu, lam)
            assert q.mean() == pytest.approx(float(mu.barycenter()[0]),
                                             abs=1e-9)

    def test_density_exactly_lam(self):
        rng = np.random.default_rng(7)
        mu = new_discrete(rng.normal(size=(5, 1)), rng.random(5) + 0.1)
        for lam in (0.5, 2.0):
            q = project_discrete_exact(mu, lam)
            slopes = (q.vright - q.vleft) / np.diff(q.t)
            assert np.abs(slopes - 1.0 / lam).max() < 1e-9

    def test_matches_sampled_pipeline(self):
        # the sampled route converges to the exact blocks as n grows
        rng = np.random.default_rng(8)
        for _ in range(5):
            mu = new_discrete(rng.normal(size=(4, 1)), rng.random(4) + 0.1)
            exact = project_discrete_exact(mu, 1.0)
            errs = []
            for n in (256, 4096):
                sampled = project_quantile(quantile_of(mu),
                                           ProjectionSpec1D(2.0, 1.0, n))
                errs.append(exact.lp_distance(sampled, 2.0))
            assert errs[1] < errs[0]
            assert errs[1] < 2e-2

    def test_idempotent_on_capped_input(self):
        # projecting the rasterized projection changes nothing
        rng = np.random.default_rng(9)
        mu = new_discrete(rng.normal(size=(3, 1)), rng.random(3) + 0.1)
        first = project_measure_1d(mu, ProjectionSpec1D(2.0, 1.0, 2048),
                                   cells=4096)
        again = project_quantile(quantile_of(first),
                                 ProjectionSpec1D(2.0, 1.0, 2048))
        assert quantile_of(first).lp_distance(again, 2.0) < 1e-4

    def test_nonexpansive_exact(self):
        rng = np.random.default_rng(10)
        for _ in range(50):
            mu = new_discrete(rng.normal(size=(6, 1)), rng.random(6) + 0.1)
            nu = new_discrete(rng.normal(size=(6, 1)), rng.random(6) + 0.1)
            lhs = project_discrete_exact(mu, 1.0).lp_distance(
                project_discrete_exact(nu, 1.0), 2.0)
            rhs = wasserstein_1d(mu, nu, 2.0)
            assert lhs <= rhs + 1e-9
