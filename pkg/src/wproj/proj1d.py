"""One-dimensional projection onto the density-capped set.

Through the quantile isometry, capping the density at lam is the constraint
Q' >= 1/lam on the quantile, so the metric projection is a cone projection
in L^p([0,1]).  Two routes are provided:

* `project_quantile` / `project_measure_1d`: sample the quantile at n
  midpoints, shear away the slope bound, and run isotonic regression
  (pool-adjacent-violators with p-mean pools).  Works for any p > 1.
* `project_discrete_exact` (p = 2): the projection of an atomic measure in
  closed form.  Each atom spreads into a density-lam block; blocks that
  would overlap merge, with positions given by weighted isotonic regression
  of the per-atom block centers.  This is exact: sheared quantiles of atomic
  measures are piecewise affine with slope -1/lam, so the greatest convex
  minorant of their primitive kinks only at atom boundaries, which reduces
  the continuum isotonic problem to the finite weighted one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import InvalidSpecError, SizeLimitError
from .measures import DiscreteMeasure, GridMeasure, GridSpec
from .ot import QuantileFn, quantile_of

__all__ = [
    "ProjectionSpec1D",
    "project_quantile",
    "brute_force_projection_oracle",
    "project_measure_1d",
    "project_discrete_exact",
    "quantile_to_grid",
    "kkt_certificate",
]

ORACLE_SIZE_LIMIT = 25


@dataclass(frozen=True)
class ProjectionSpec1D:
    """Exponent p > 1, density cap lam, and quantile sample count n."""

    p: float = 2.0
    lam: float = 1.0
    n: int = 4096

    def __post_init__(self):
        if not self.p > 1.0:
            raise InvalidSpecError("projection requires p > 1")
        if not self.lam > 0.0:
            raise InvalidSpecError("density cap must be positive")
        if self.n < 2:
            raise InvalidSpecError("need at least 2 quantile samples")


def project_quantile(q: QuantileFn, spec: ProjectionSpec1D) -> QuantileFn:
    """Project a quantile onto the cone of slopes >= 1/lam (L^p distance).

    Samples at t_i = (i+1/2)/n, solves the sheared isotonic problem with
    increment 1/(lam n), and returns the piecewise-linear quantile through
    the projected samples (end segments extended with their own slopes).
    """
    n, lam, p = spec.n, spec.lam, spec.p
    ti = (np.arange(n) + 0.5) / n
    qi = q(ti)
    shift = np.arange(n) / (lam * n)
    y = _kernels.isotonic_fit(qi - shift, np.full(n, 1.0 / n), p)
    y = np.maximum.accumulate(y)  # clip bisection dust
    x = y + shift
    return _interp_through_midpoints(ti, x)


def _interp_through_midpoints(ti: np.ndarray, x: np.ndarray) -> QuantileFn:
    """Piecewise-linear quantile through (t_i, x_i), end slopes extended."""
    n = ti.size
    slope0 = (x[1] - x[0]) / (ti[1] - ti[0])
    slope1 = (x[-1] - x[-2]) / (ti[-1] - ti[-2])
    t = np.concatenate(([0.0], ti, [1.0]))
    v = np.concatenate(([x[0] - slope0 * ti[0]], x,
                        [x[-1] + slope1 * (1.0 - ti[-1])]))
    return QuantileFn.from_linear(t, v)


def brute_force_projection_oracle(q, p: float, lam: float = 1.0,
                                  iters: int = 1_000_000) -> np.ndarray:
    """Independent oracle for the sampled projection (n <= 25).

    Projected subgradient descent with diminishing steps from the feasible
    start x_i = i/(lam n); see the kernel for the schedule.  Exists to
    cross-check the pool-adjacent-violators route; keep it slow and simple.
    """
    q = np.asarray(q, dtype=np.float64)
    if q.size > ORACLE_SIZE_LIMIT:
        raise SizeLimitError(f"oracle accepts n <= {ORACLE_SIZE_LIMIT}")
    if not p > 1.0:
        raise InvalidSpecError("projection requires p > 1")
    return _kernels.descent_oracle(q, p, lam, iters=iters)


def project_measure_1d(mu: DiscreteMeasure | GridMeasure,
                       spec: ProjectionSpec1D,
                       cells: int | None = None) -> GridMeasure:
    """Project a 1-D measure onto the density-capped set, rasterized.

    Quantile sampling + isotonic projection + exact rasterization of the
    projected (piecewise-linear, slope >= 1/lam) quantile onto a grid.
    """
    proj = project_quantile(quantile_of(mu), spec)
    return quantile_to_grid(proj, spec.lam, cells or spec.n)


def quantile_to_grid(q: QuantileFn, lam: float, cells: int) -> GridMeasure:
    """Rasterize the measure with quantile q onto a uniform 1-D grid.

    Cell masses are exact preimage lengths (cdf differences), so a measure
    with density <= lam stays capped cell by cell.
    """
    lo = float(q.vleft[0])
    hi = float(q.vright[-1])
    width = max(hi - lo, 1e-12)
    spacing = width / cells
    grid = GridSpec(np.array([lo]), np.array([spacing]), (cells,))
    edges = lo + spacing * np.arange(cells + 1)
    edges[-1] = np.nextafter(max(edges[-1], hi), np.inf)  # include sup of support
    cdf = q.cdf(edges)
    mass = np.diff(cdf)
    mass = np.maximum(mass, 0.0)
    mass /= mass.sum()
    return GridMeasure(grid, mass, lam, capped=True)


def project_discrete_exact(mu: DiscreteMeasure, lam: float = 1.0) -> QuantileFn:
    """Exact p = 2 projection of an atomic measure (density-lam blocks).

    Returns the quantile of the projected measure: per merged block a linear
    segment of slope exactly 1/lam.
    """
    q = quantile_of(mu)  # merges coincident atoms, sorts
    pos = q.vleft
    t = q.t
    w = np.diff(t)
    centers = pos - (t[:-1] + t[1:]) / (2.0 * lam)
    y = _kernels.isotonic_fit(centers, w, 2.0)
    # one segment per pool (consecutive equal fitted values)
    head = np.concatenate(([True], np.diff(y) != 0.0))
    t_pool = np.concatenate((t[:-1][head], [1.0]))
    vl = y[head] + t_pool[:-1] / lam
    vr = y[head] + t_pool[1:] / lam
    return QuantileFn(t_pool, vl, vr, mode="linear")


def kkt_certificate(q: np.ndarray, x: np.ndarray, lam: float,
                    tol: float = 1e-9) -> dict:
    """p = 2 optimality certificate for the sampled projection.

    With residual r = x - q: multipliers are -2/n times the partial sums of
    r, so optimality means every partial sum <= 0, the total sum ~ 0, and
    partial sums ~ 0 wherever the increment constraint is slack.
    """
    q = np.asarray(q, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    n = q.size
    r = x - q
    csum = np.cumsum(r)
    inactive = np.diff(x) > 1.0 / (lam * n) + tol
    scale = max(1.0, np.abs(q).max())
    ok_sign = bool(csum.max() <= tol * scale)
    ok_total = bool(abs(csum[-1]) <= tol * scale)
    ok_slack = bool(np.all(np.abs(csum[:-1][inactive]) <= tol * scale))
    return {
        "partial_sums_nonpositive": ok_sign,
        "total_sum_zero": ok_total,
        "complementary_slackness": ok_slack,
        "ok": ok_sign and ok_total and ok_slack,
        "max_partial_sum": float(csum.max()),
    }
