"""Quantitative reproduction of the small-p counterexample.

The construction: mu puts mass 1/2 at the origin and 1/2 at distance 2R
along the first axis (R the radius of the ball of volume 1/2), nu is a
Dirac at the origin.  Their projections are two tangent balls and one ball
of radius 2^(1/d) R.  At p = 1 the projections are strictly *farther* apart
than the originals, with a gap on the order of d^(-3/2); by continuity the
projection fails to be nonexpansive for p close to 1, while at p = 2 the
Dirac case of the weak-nonexpansiveness theorem forces the gap back below
zero.  This module builds the instances, evaluates the closed forms, and
estimates W_p between the projections by exact OT on matched-seed samples
or on grid discretizations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DimensionTooSmallError, NoSignChangeError, SizeLimitError
from .measures import (
    BallUnionMeasure,
    DiscreteMeasure,
    GridSpec,
    discretize_ball_union,
    new_discrete,
    rad_ball,
    sample_ball_union,
    vol_ball,
)
from .ot import SOLVE_SIZE_LIMIT, cost_matrix
from .projnd import project_atoms_analytic

__all__ = [
    "CounterexampleInstance",
    "GapRecord",
    "build_counterexample",
    "wp_mu_nu_exact",
    "sigma_E_analytic",
    "sigma_E_montecarlo",
    "gap_curve",
    "find_p_threshold",
    "t_minus_tp_bound_check",
    "E_BAND_LO",
    "E_BAND_HI",
]

# the test band inside the big ball: E = {y: lo^(1/d) R <= |y'| <= hi^(1/d) R,
# |y_1| <= sqrt(2^(2/d) - hi^(2/d)) R}; lo + (hi - lo) + (2 - hi) = 2 exactly.
E_BAND_LO = 1.1
E_BAND_HI = 1.9


@dataclass(frozen=True)
class CounterexampleInstance:
    """All pieces of the construction in dimension d."""

    d: int
    R: float
    mu: DiscreteMeasure
    nu: DiscreteMeasure
    rho: BallUnionMeasure  # projection of mu: two tangent balls
    sigma: BallUnionMeasure  # projection of nu: one ball, radius 2^(1/d) R


@dataclass(frozen=True)
class GapRecord:
    """One estimate of gap(p) = W_p(rho, sigma) - W_p(mu, nu)."""

    d: int
    p: float
    n: int
    seed: int
    mode: str  # "sample" or "grid"
    wp_mu_nu: float
    wp_rho_sigma: float

    @property
    def gap(self) -> float:
        return self.wp_rho_sigma - self.wp_mu_nu

    def row(self) -> dict:
        return {"d": self.d, "p": self.p, "n": self.n, "seed": self.seed,
                "mode": self.mode, "wp_mu_nu": repr(self.wp_mu_nu),
                "wp_rho_sigma": repr(self.wp_rho_sigma),
                "gap": repr(self.gap)}


def build_counterexample(d: int) -> CounterexampleInstance:
    if d < 2:
        raise DimensionTooSmallError("the construction needs d >= 2")
    R = rad_ball(d, 0.5)
    e1 = np.zeros(d)
    far = e1.copy()
    far[0] = 2.0 * R
    mu = new_discrete([e1, far], [0.5, 0.5])
    nu = new_discrete([e1], [1.0])
    rho = project_atoms_analytic(mu, 1.0)
    sigma = project_atoms_analytic(nu, 1.0)
    return CounterexampleInstance(d, R, mu, nu, rho, sigma)


def wp_mu_nu_exact(inst: CounterexampleInstance, p: float) -> float:
    """W_p(mu, nu) in closed form: the only plan moves mass 1/2 across 2R."""
    if p < 1.0:
        raise ValueError("need p >= 1")
    return (0.5 * (2.0 * inst.R) ** p) ** (1.0 / p)


def sigma_E_analytic(d: int) -> float:
    """Mass of the band E under sigma (a cylinder inside the big ball).

    2 sqrt(2^(2/d) - 1.9^(2/d)) R  *  [Vol_{d-1}(1.9^(1/d) R) - Vol_{d-1}(1.1^(1/d) R)].
    """
    if d < 2:
        raise DimensionTooSmallError("the band needs d >= 2")
    R = rad_ball(d, 0.5)
    half_height = math.sqrt(2.0 ** (2.0 / d) - E_BAND_HI ** (2.0 / d)) * R
    shell = (vol_ball(d - 1, E_BAND_HI ** (1.0 / d) * R)
             - vol_ball(d - 1, E_BAND_LO ** (1.0 / d) * R))
    return 2.0 * half_height * shell


def sigma_E_montecarlo(d: int, n: int = 1_000_000, seed: int = 0):
    """Monte Carlo estimate of sigma(E): fraction of ball samples in the band.

    Returns (estimate, standard_error).
    """
    if n < 10_000:
        raise ValueError("need n >= 1e4 samples")
    inst = build_counterexample(d)
    pts = sample_ball_union(inst.sigma, n, seed).points
    R = inst.R
    perp = np.linalg.norm(pts[:, 1:], axis=1)
    axial = np.abs(pts[:, 0])
    inside = ((perp >= E_BAND_LO ** (1.0 / d) * R)
              & (perp <= E_BAND_HI ** (1.0 / d) * R)
              & (axial <= math.sqrt(2.0 ** (2.0 / d) - E_BAND_HI ** (2.0 / d)) * R))
    phat = inside.mean()
    se = math.sqrt(max(phat * (1.0 - phat), 1e-300) / n)
    return float(phat), float(se)


_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53)


def _kronecker_points(n: int, dim: int, seed) -> np.ndarray:
    """Randomly shifted Kronecker lattice in [0,1)^dim (low discrepancy)."""
    alpha = np.sqrt(np.array(_PRIMES[:dim], dtype=np.float64))
    alpha -= np.floor(alpha)
    shift = np.random.default_rng(seed).random(dim)
    i = np.arange(1, n + 1, dtype=np.float64)[:, None]
    return np.mod(i * alpha[None, :] + shift[None, :], 1.0)


def _qmc_ball(center: np.ndarray, r: float, n: int, seed) -> np.ndarray:
    """Low-discrepancy uniform points in one ball.

    Box-Muller pairs give the direction, the last lattice coordinate the
    radius; the random shift (from the seed) makes distinct replicates.
    """
    d = center.size
    ngauss = 2 * ((d + 1) // 2)
    u = np.clip(_kronecker_points(n, ngauss + 1, seed), 1e-12, 1.0 - 1e-12)
    g = np.empty((n, ngauss))
    for k in range(0, ngauss, 2):
        amp = np.sqrt(-2.0 * np.log(u[:, k]))
        g[:, k] = amp * np.cos(2.0 * np.pi * u[:, k + 1])
        g[:, k + 1] = amp * np.sin(2.0 * np.pi * u[:, k + 1])
    g = g[:, :d]
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = u[:, ngauss] ** (1.0 / d)
    return center + r * g * rad[:, None]


def _qmc_ball_union(b: BallUnionMeasure, n: int, seed: int,
                    salt: int = 0) -> DiscreteMeasure:
    """Low-discrepancy analogue of sample_ball_union: per-ball strata of
    round(mass * n) points, equal weights."""
    counts = np.round(b.masses * n).astype(int)
    counts[-1] += n - counts.sum()
    pts = np.empty((n, b.dim))
    pos = 0
    for k, (c, r, cnt) in enumerate(zip(b.centers, b.radii, counts)):
        pts[pos:pos + cnt] = _qmc_ball(c, float(r), int(cnt),
                                       (seed, salt, k))
        pos += cnt
    return new_discrete(pts, np.full(n, 1.0 / n))


def _wp_between_clouds(x: DiscreteMeasure, y: DiscreteMeasure, p: float,
                       warm_basis=None):
    """(W_p, basis) between two discrete measures; basis enables warm restarts."""
    if x.size * y.size > SOLVE_SIZE_LIMIT:
        raise SizeLimitError(f"{x.size} x {y.size} exceeds {SOLVE_SIZE_LIMIT}")
    C = cost_matrix(x.points, y.points, p)
    bi, bj, flow, _ = _kernels.solve_transportation(
        x.weights, y.weights, C, init=warm_basis)
    cost = float(np.maximum(flow, 0.0) @ C[bi, bj])
    return cost ** (1.0 / p), (bi, bj)


def _discretized_pair(inst: CounterexampleInstance, n: int, seed: int,
                      mode: str):
    """Matched-seed discretizations of rho and sigma (size ~n each).

    Modes: "sample" (i.i.d. uniform), "qmc" (shifted low-discrepancy
    lattices; about an order of magnitude less estimator noise, which the
    small gaps at d <= 4 need), "grid" (deterministic rasterization).
    """
    if mode == "sample":
        return (sample_ball_union(inst.rho, n, seed),
                sample_ball_union(inst.sigma, n, seed))
    if mode == "qmc":
        return (_qmc_ball_union(inst.rho, n, seed, salt=0),
                _qmc_ball_union(inst.sigma, n, seed, salt=1))
    if mode == "grid":
        cells_per_axis = max(4, int(round(n ** (1.0 / inst.d))))
        lows, highs = zip(inst.rho.bounding_box(), inst.sigma.bounding_box())
        low = np.minimum.reduce(lows)
        high = np.maximum.reduce(highs)
        spacing = (high - low).max() / cells_per_axis
        grid = GridSpec.cover(low - spacing, high + spacing, spacing)
        rho_g = discretize_ball_union(inst.rho, grid)
        sig_g = discretize_ball_union(inst.sigma, grid)
        return rho_g.as_discrete(), sig_g.as_discrete()
    raise ValueError(f"unknown mode {mode!r}")


def gap_curve(d: int, p_list, n: int = 2000, seed: int = 0,
              mode: str = "sample") -> list:
    """GapRecords for each p, on one fixed discretization of the projections.

    The same point sets serve every p (costs are re-powered), so the curve
    is continuous in p at fixed resolution; consecutive solves warm-start
    from the previous basis.  Modes as in the discretizer: "sample", "qmc",
    "grid".
    """
    inst = build_counterexample(d)
    rho_hat, sig_hat = _discretized_pair(inst, n, seed, mode)
    out = []
    basis = None
    for p in p_list:
        wp_rs, basis = _wp_between_clouds(rho_hat, sig_hat, float(p), basis)
        out.append(GapRecord(d, float(p), n, seed, mode,
                             wp_mu_nu_exact(inst, float(p)), wp_rs))
    return out


def find_p_threshold(d: int, tol_p: float = 0.05, n: int = 1000,
                     seed: int = 0, mode: str = "sample",
                     p_lo: float = 1.0, p_hi: float = 2.0):
    """Bisect for the sign change of gap(p); returns (p_hat, records).

    Preconditions checked first: gap(p_lo) > 0 and gap(p_hi) <= 0 at this
    resolution (NoSignChangeError otherwise).  The discretization is fixed
    across the whole bisection.
    """
    inst = build_counterexample(d)
    rho_hat, sig_hat = _discretized_pair(inst, n, seed, mode)
    basis = None
    records = []

    def gap_at(p):
        nonlocal basis
        wp_rs, basis = _wp_between_clouds(rho_hat, sig_hat, p, basis)
        rec = GapRecord(d, p, n, seed, mode, wp_mu_nu_exact(inst, p), wp_rs)
        records.append(rec)
        return rec.gap

    glo = gap_at(p_lo)
    ghi = gap_at(p_hi)
    if not (glo > 0.0 and ghi <= 0.0):
        raise NoSignChangeError(
            f"gap({p_lo}) = {glo:.4g}, gap({p_hi}) = {ghi:.4g} "
            f"at n = {n}: no bracket")
    lo, hi = p_lo, p_hi
    while hi - lo > tol_p:
        mid = 0.5 * (lo + hi)
        if gap_at(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi), records


def t_minus_tp_bound_check(p: float, t_grid=None) -> bool:
    """Grid check of t - t^p <= p - 1 for t >= 0 (equality family at p = 1)."""
    if p < 1.0:
        raise ValueError("need p >= 1")
    if t_grid is None:
        t_grid = np.linspace(0.0, 10.0, 100_001)
    t = np.asarray(t_grid, dtype=np.float64)
    return bool(np.max(t - t ** p) <= p - 1.0 + 1e-12)
