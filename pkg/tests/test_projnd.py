"""Grid projection: capacities, analytic agreement, refinement, equivariance."""

import math

import numpy as np
import pytest

import wproj.errors as errors
from wproj.measures import (
    BallUnionMeasure,
    GridSpec,
    discretize_ball_union,
    new_discrete,
    rad_ball,
)
from wproj.ot import plan_cost, quantile_of, solve_exact, wasserstein_1d
from wproj.proj1d import ProjectionSpec1D, project_discrete_exact
from wproj.projnd import (
    CapacitatedInstance,
    auto_grid,
    project_atoms_analytic,
    project_capacitated,
    projection_distance,
)


class TestAnalytic:
    def test_single_dirac(self):
        bu = project_atoms_analytic(new_discrete([[0.0, 0.0]], [1.0]), 1.0)
        assert bu.radii[0] == pytest.approx(1.0 / math.sqrt(math.pi), rel=1e-12)

    def test_two_tangent_balls(self):
        R = rad_ball(2, 0.5)
        mu = new_discrete([[0.0, 0.0], [2 * R, 0.0]], [0.5, 0.5])
        bu = project_atoms_analytic(mu, 1.0)
        assert np.allclose(bu.radii, R, rtol=1e-12)

    def test_overlap_raises(self):
        R = rad_ball(2, 0.5)
        mu = new_discrete([[0.0, 0.0], [R, 0.0]], [0.5, 0.5])
        with pytest.raises(errors.OverlapError):
            project_atoms_analytic(mu, 1.0)


class TestInstanceValidation:
    def test_capacity(self):
        mu = new_discrete([[0.5, 0.5]], [1.0])
        small = GridSpec([0.0, 0.0], [0.1, 0.1], (5, 5))  # capacity 0.25
        with pytest.raises(errors.InfeasibleCapacityError):
            CapacitatedInstance(mu, small, 1.0, 2.0)

    def test_atom_outside(self):
        mu = new_discrete([[5.0, 5.0]], [1.0])
        grid = GridSpec([0.0, 0.0], [0.1, 0.1], (20, 20))
        with pytest.raises(errors.AtomOutsideGridError):
            CapacitatedInstance(mu, grid, 1.0, 2.0)


class TestCapacitated:
    def test_feasible_input_fixed(self):
        # a capped grid measure's atomization projects to itself at zero cost
        grid = GridSpec([0.0, 0.0], [0.5, 0.5], (2, 2))
        masses = np.array([0.4, 0.3, 0.2, 0.1])  # cap = 0.25 per cell? no: 0.5^2=0.25 vol, lam=2 -> cap 0.5
        mu = new_discrete(grid.centers(), masses)
        inst = CapacitatedInstance(mu, grid, 2.0, 2.0)
        rho, plan = project_capacitated(inst)
        assert plan_cost(plan, 2.0) == pytest.approx(0.0, abs=1e-15)
        assert np.allclose(rho.cell_mass, masses, atol=1e-12)

    def test_dirac_matches_analytic_ball(self):
        # symmetric-difference mass between the grid projection and the
        # analytic ball at spacing 0.02 stays below 0.05
        mu = new_discrete([[0.0, 0.0]], [1.0])
        grid = GridSpec.cover([-0.7, -0.7], [0.7, 0.7], 0.02)
        rho, _ = project_capacitated(CapacitatedInstance(mu, grid, 1.0, 2.0))
        ball = BallUnionMeasure([[0.0, 0.0]], [rad_ball(2, 1.0)], 1.0)
        ref = discretize_ball_union(ball, grid, subsamples=4)
        sym_diff = 0.5 * np.abs(rho.cell_mass - ref.cell_mass).sum()
        assert sym_diff <= 0.05

    def test_cost_monotone_under_refinement(self):
        mu = new_discrete([[0.0, 0.0], [0.45, 0.3]], [0.5, 0.5])
        costs = []
        for h in (0.08, 0.04, 0.02):
            grid = GridSpec.cover([-0.8, -0.8], [1.2, 1.2], h)
            costs.append(projection_distance(
                CapacitatedInstance(mu, grid, 1.0, 2.0),
                density_corrected=True))
        assert costs[1] <= costs[0] + 1e-9
        assert costs[2] <= costs[1] + 1e-9

    def test_capacity_respected(self):
        rng = np.random.default_rng(0)
        mu = new_discrete(rng.random((4, 2)), rng.random(4) + 0.1)
        grid = auto_grid([mu], 1.0, 0.06)
        rho, plan = project_capacitated(CapacitatedInstance(mu, grid, 1.0, 2.0))
        cap = grid.cell_volume
        assert rho.cell_mass.max() <= cap + 1e-12
        assert rho.cell_mass.sum() == pytest.approx(1.0, abs=1e-9)

    def test_translation_equivariance_exact(self):
        rng = np.random.default_rng(1)
        mu = new_discrete(rng.random((3, 2)), rng.random(3) + 0.1)
        grid = auto_grid([mu], 1.0, 0.07)
        h = np.array([3 * 0.07, -2 * 0.07])
        rho, _ = project_capacitated(CapacitatedInstance(mu, grid, 1.0, 2.0))
        rho_h, _ = project_capacitated(
            CapacitatedInstance(mu.translate(h), grid.translate(h), 1.0, 2.0))
        assert np.array_equal(rho.cell_mass, rho_h.cell_mass)
        assert np.allclose(rho.grid.origin + h, rho_h.grid.origin)


class TestProjectionDistance:
    def test_feasible_zero(self):
        grid = GridSpec([0.0], [0.25], (8,))
        mu = new_discrete(grid.centers(), np.full(8, 0.125))
        assert projection_distance(CapacitatedInstance(mu, grid, 1.0, 2.0)) \
            == pytest.approx(0.0, abs=1e-12)

    def test_dirac_1d_twelfth(self):
        # distance of a point mass to uniform[-1/2,1/2]: 1/sqrt(12)
        mu = new_discrete([[0.0]], [1.0])
        grid = GridSpec.cover([-0.75], [0.75], 1.0 / 512)
        dist = projection_distance(CapacitatedInstance(mu, grid, 1.0, 2.0))
        assert dist == pytest.approx(1.0 / math.sqrt(12.0), rel=0.01)

    def test_two_dirac_radial_quadrature(self):
        # two half-mass atoms far apart: cost = 2 * (pi R^4 / 2) with
        # R = Rad_2(1/2), by the radial map into each ball
        R = rad_ball(2, 0.5)
        mu = new_discrete([[0.0, 0.0], [2 * R, 0.0]], [0.5, 0.5])
        grid = GridSpec.cover([-0.55, -0.55], [2 * R + 0.55, 0.55], 0.02)
        dist = projection_distance(CapacitatedInstance(mu, grid, 1.0, 2.0))
        exact = math.sqrt(math.pi * R ** 4)
        assert dist == pytest.approx(exact, rel=0.02)

    def test_consistency_with_proj1d(self):
        # d = 1 grid route vs the exact quantile route, within 1% at 1/512
        rng = np.random.default_rng(2)
        for _ in range(3):
            mu = new_discrete(rng.random((3, 1)), rng.random(3) + 0.2)
            grid = GridSpec.cover([-1.0], [2.0], 1.0 / 512)
            grid_dist = projection_distance(
                CapacitatedInstance(mu, grid, 1.0, 2.0))
            exact_dist = project_discrete_exact(mu, 1.0).lp_distance(
                quantile_of(mu), 2.0)
            assert grid_dist == pytest.approx(exact_dist, rel=0.01)
