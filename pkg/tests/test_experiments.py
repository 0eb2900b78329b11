"""Counterexample construction, closed forms, gap estimators, threshold."""

import math

import numpy as np
import pytest

import wproj.errors as errors
from wproj.experiments import (
    E_BAND_HI,
    E_BAND_LO,
    build_counterexample,
    find_p_threshold,
    gap_curve,
    sigma_E_analytic,
    sigma_E_montecarlo,
    t_minus_tp_bound_check,
    wp_mu_nu_exact,
)
from wproj.measures import rad_ball, sample_ball_union, vol_ball

# hand evaluation of the d = 2 band mass, frozen before the build:
# 2 sqrt(2 - 1.9) R * [2 sqrt(1.9) R - 2 sqrt(1.1) R] with R^2 = 1/(2 pi)
SIGMA_E_D2 = (2.0 / math.pi) * math.sqrt(0.1) * (math.sqrt(1.9) - math.sqrt(1.1))


class TestConstruction:
    def test_d2_radii(self):
        inst = build_counterexample(2)
        assert inst.R == pytest.approx(1.0 / math.sqrt(2 * math.pi), rel=1e-12)
        assert inst.sigma.radii[0] == pytest.approx(
            math.sqrt(2.0) * inst.R, rel=1e-12)
        assert inst.sigma.radii[0] == pytest.approx(rad_ball(2, 1.0), rel=1e-12)

    def test_tangency(self):
        for d in (2, 3, 5):
            inst = build_counterexample(d)
            dist = np.linalg.norm(inst.rho.centers[1] - inst.rho.centers[0])
            assert dist == pytest.approx(2 * inst.R, rel=1e-12)

    def test_radius_grows_like_sqrt_d(self):
        for d in range(2, 65):
            r = build_counterexample(d).R / math.sqrt(d)
            assert 0.1 <= r <= 1.0

    def test_d1_rejected(self):
        with pytest.raises(errors.DimensionTooSmallError):
            build_counterexample(1)


class TestWpMuNu:
    def test_w1_is_R(self):
        inst = build_counterexample(2)
        assert wp_mu_nu_exact(inst, 1.0) == inst.R  # exact, no tolerance

    def test_w2(self):
        inst = build_counterexample(3)
        assert wp_mu_nu_exact(inst, 2.0) == pytest.approx(
            math.sqrt(2.0) * inst.R, rel=1e-14)

    def test_continuous_at_one(self):
        inst = build_counterexample(2)
        assert abs(wp_mu_nu_exact(inst, 1.001) - inst.R) <= 0.01 * inst.R

    def test_matches_simplex(self):
        from wproj.ot import plan_cost, solve_exact

        inst = build_counterexample(2)
        for p in (1.0, 1.5, 2.0):
            ref = plan_cost(solve_exact(inst.mu, inst.nu, p), p) ** (1 / p)
            assert wp_mu_nu_exact(inst, p) == pytest.approx(ref, rel=1e-12)


class TestSigmaE:
    def test_d2_hand_value(self):
        assert sigma_E_analytic(2) == pytest.approx(SIGMA_E_D2, abs=1e-12)
        assert sigma_E_analytic(2) == pytest.approx(0.0663532, abs=1e-6)

    def test_contained_in_unit_mass(self):
        for d in range(2, 65):
            assert 0.0 < sigma_E_analytic(d) < 1.0

    def test_bounded_below(self):
        assert min(sigma_E_analytic(d) for d in range(2, 65)) >= 0.01

    def test_montecarlo_agrees(self):
        for d in (2, 3):
            ana = sigma_E_analytic(d)
            mc, se = sigma_E_montecarlo(d, n=100_000, seed=0)
            assert abs(mc - ana) <= 3.0 * se

    def test_montecarlo_deterministic(self):
        a = sigma_E_montecarlo(2, n=10_000, seed=5)
        b = sigma_E_montecarlo(2, n=10_000, seed=5)
        assert a == b

    def test_band_edge_identity(self):
        # the band height is chosen so its corner lies exactly on the ball
        for d in (2, 3, 7):
            assert (2.0 ** (2.0 / d) - E_BAND_HI ** (2.0 / d)) \
                + E_BAND_HI ** (2.0 / d) == pytest.approx(2.0 ** (2.0 / d),
                                                          abs=1e-15)


class TestEBandSeparation:
    def test_perp_distance_lower_bound(self):
        # every band point is at least (1.1^(1/d)-1) R from any support
        # point of rho in the perpendicular coordinates
        for d in (2, 3):
            inst = build_counterexample(d)
            R = inst.R
            pts = sample_ball_union(inst.sigma, 20_000, seed=1).points
            perp = np.linalg.norm(pts[:, 1:], axis=1)
            band = ((perp >= E_BAND_LO ** (1 / d) * R)
                    & (perp <= E_BAND_HI ** (1 / d) * R))
            rho_pts = sample_ball_union(inst.rho, 20_000, seed=2).points
            rho_perp = np.linalg.norm(rho_pts[:, 1:], axis=1)
            assert rho_perp.max() <= R + 1e-12
            gap = perp[band].min() - R
            assert gap >= (E_BAND_LO ** (1 / d) - 1.0) * R - 1e-12


class TestGapCurve:
    def test_d2_signs(self):
        recs = gap_curve(2, [1.0, 2.0], n=900, seed=0, mode="qmc")
        assert recs[0].gap > 0.0
        assert recs[1].gap <= 0.0

    def test_modes_agree_roughly(self):
        for mode in ("sample", "qmc", "grid"):
            rec = gap_curve(2, [2.0], n=900, seed=3, mode=mode)[0]
            assert rec.gap == pytest.approx(-0.124, abs=0.04), mode

    def test_continuity_in_p(self):
        # adjacent p on a 0.01 grid move the gap by at most 5 wp_mu_nu dp
        inst_w = wp_mu_nu_exact(build_counterexample(2), 1.0)
        ps = [1.0, 1.01, 1.02, 1.03]
        recs = gap_curve(2, ps, n=600, seed=1, mode="qmc")
        for a, b in zip(recs[:-1], recs[1:]):
            assert abs(b.gap - a.gap) <= 5.0 * inst_w * 0.01

    def test_record_fields(self):
        rec = gap_curve(3, [1.5], n=400, seed=7, mode="sample")[0]
        assert rec.d == 3 and rec.p == 1.5 and rec.n == 400
        assert rec.mode == "sample"
        assert rec.gap == rec.wp_rho_sigma - rec.wp_mu_nu


class TestThreshold:
    def test_d2_bracket_and_width(self):
        p_hat, recs = find_p_threshold(2, tol_p=0.1, n=700, seed=0, mode="qmc")
        assert 1.0 < p_hat < 2.0
        assert recs[0].p == 1.0 and recs[1].p == 2.0

    def test_no_sign_change_raises(self):
        with pytest.raises(errors.NoSignChangeError):
            find_p_threshold(2, tol_p=0.1, n=700, seed=0, mode="qmc",
                             p_lo=1.8, p_hi=2.0)

    def test_gap_beyond_threshold_negative(self):
        p_hat, _ = find_p_threshold(2, tol_p=0.05, n=700, seed=2, mode="qmc")
        rec = gap_curve(2, [p_hat + 0.5], n=700, seed=2, mode="qmc")[0]
        assert rec.gap <= 0.0


class TestTminusTp:
    def test_p1_equality(self):
        t = np.linspace(0, 10, 1001)
        assert float(np.max(t - t ** 1.0)) == 0.0
        assert t_minus_tp_bound_check(1.0)

    def test_p2_max_quarter(self):
        t = np.linspace(0.0, 10.0, 100_001)
        assert np.max(t - t ** 2) == pytest.approx(0.25, abs=1e-8)
        assert t_minus_tp_bound_check(2.0)

    @pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0])
    def test_grid_check(self, p):
        assert t_minus_tp_bound_check(p)
