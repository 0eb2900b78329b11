"""Executable checks for the proved properties of the projection.

Each check builds the objects a statement quantifies over, evaluates both
sides, and returns a CheckReport with the slack (rhs - lhs), so regressions
stay visible even while checks pass.  One-dimensional checks at p = 2 run
through the exact block projection and quantile calculus and carry 1e-6
tolerances; grid checks carry first-order tolerances C * spacing with
C = 4 * instance diameter.

Report semantics: slack = rhs - lhs, pass iff slack >= -tolerance.  Checks
that compare a magnitude against a bound put the magnitude in lhs and the
bound in rhs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasibleInputError, InvalidSpecError
from .measures import DiscreteMeasure, GridSpec, new_discrete, sample_ball_union
from .ot import (
    QuantileFn,
    TransportPlan,
    glue,
    plan_cost,
    quantile_of,
    solve_exact,
    wasserstein_1d,
)
from .proj1d import ProjectionSpec1D, project_discrete_exact, project_quantile
from .projnd import CapacitatedInstance, auto_grid, project_atoms_analytic, project_capacitated

__all__ = [
    "CheckReport",
    "check_weak_nonexpansiveness",
    "check_nonexpansive",
    "check_barycenter_preservation",
    "check_translation_invariance",
    "check_geodesic_density_bound_1d",
    "random_discrete",
    "random_block_quantile_1d",
    "matching_support",
    "glued_support_across_flip",
]


@dataclass
class CheckReport:
    """Outcome of one executable check."""

    name: str
    lhs: float
    rhs: float
    tolerance: float
    d: int
    p: float
    seed: int | None = None
    hard: bool = True  # counts toward suite failure
    metadata: dict = field(default_factory=dict)

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.slack >= -self.tolerance

    def row(self) -> dict:
        return {
            "name": self.name,
            "d": self.d,
            "p": self.p,
            "lhs": repr(self.lhs),
            "rhs": repr(self.rhs),
            "slack": repr(self.slack),
            "tolerance": repr(self.tolerance),
            "pass": int(self.passed),
            "seed": "" if self.seed is None else self.seed,
        }


def _instance_diameter(*measures) -> float:
    pts = np.vstack([m.points for m in measures])
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    return float(np.linalg.norm(hi - lo))


def _grid_tolerance(grid: GridSpec, *measures) -> float:
    return 4.0 * max(_instance_diameter(*measures), 1.0) * float(grid.spacing.max())


def _project_pair_on_grid(mu, nu, lam, grid, p=2.0):
    rho, aplan = project_capacitated(CapacitatedInstance(mu, grid, lam, p))
    sig, bplan = project_capacitated(CapacitatedInstance(nu, grid, lam, p))
    return aplan.target, bplan.target, aplan, bplan


def _transpose(plan: TransportPlan) -> TransportPlan:
    return TransportPlan(plan.target, plan.source, plan.j, plan.i, plan.mass)


# ---------------------------------------------------------------------------
# weak nonexpansiveness: W2^2(P mu, P nu) <= cost of the glued plan


def check_weak_nonexpansiveness(mu: DiscreteMeasure, nu: DiscreteMeasure,
                                lam: float = 1.0, grid: GridSpec | None = None,
                                seed=None) -> CheckReport:
    """lhs = W2^2 of the projections, rhs = cost of the plan glued through them.

    d = 1 runs exactly: every plan in sight is the monotone coupling, so the
    glued plan's cost is the quantile integral of |Q_mu - Q_nu|^2 (equal to
    W2^2(mu, nu): the glued plan is optimal in one dimension).  d >= 2
    projects on the grid and composes discrete plans with `glue`.
    """
    if mu.dim == 1:
        pm = project_discrete_exact(mu, lam)
        pn = project_discrete_exact(nu, lam)
        lhs = pm.lp_distance(pn, 2.0) ** 2
        rhs = quantile_of(mu).lp_distance(quantile_of(nu), 2.0) ** 2
        cross = plan_cost(solve_exact(mu, nu, 2.0), 2.0)
        return CheckReport("weak_nonexpansiveness", lhs, rhs, 1e-6, 1, 2.0,
                           seed, metadata={"w22_simplex": cross})
    if grid is None:
        raise InvalidSpecError("grid required for d >= 2")
    rho, sig, aplan, bplan = _project_pair_on_grid(mu, nu, lam, grid)
    eta = solve_exact(rho, sig, 2.0)
    gamma = glue(eta, _transpose(aplan), _transpose(bplan))
    lhs = plan_cost(eta, 2.0)
    rhs = plan_cost(gamma, 2.0)
    tol = _grid_tolerance(grid, mu, nu)
    return CheckReport("weak_nonexpansiveness", lhs, rhs, tol, mu.dim, 2.0,
                       seed, metadata={"entries": gamma.size})


# ---------------------------------------------------------------------------
# the nonexpansiveness question (Q)


def check_nonexpansive(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float,
                       lam: float = 1.0, grid: GridSpec | None = None,
                       n1d: int = 4096, seed=None) -> CheckReport:
    """lhs = W_p of the projections, rhs = W_p of the inputs.

    Hard only where a theorem covers it: d = 1 with p = 2, or one input a
    Dirac with p = 2.  Elsewhere the report is informational; the answer may
    genuinely be negative.
    """
    dirac = min(mu.size, nu.size) == 1
    if mu.dim == 1:
        if p == 2.0:
            lhs = project_discrete_exact(mu, lam).lp_distance(
                project_discrete_exact(nu, lam), 2.0)
            rhs = wasserstein_1d(mu, nu, 2.0)
            return CheckReport("nonexpansive", lhs, rhs, 1e-6, 1, 2.0, seed)
        spec = ProjectionSpec1D(p=p, lam=lam, n=n1d)
        pm = project_quantile(quantile_of(mu), spec)
        pn = project_quantile(quantile_of(nu), spec)
        lhs = pm.lp_distance(pn, p)
        rhs = wasserstein_1d(mu, nu, p)
        return CheckReport("nonexpansive", lhs, rhs, 1e-6, 1, p, seed,
                           hard=False, metadata={"n": n1d})
    if grid is None:
        raise InvalidSpecError("grid required for d >= 2")
    rho, sig, _, _ = _project_pair_on_grid(mu, nu, lam, grid, p)
    lhs = plan_cost(solve_exact(rho, sig, p), p) ** (1.0 / p)
    rhs = plan_cost(solve_exact(mu, nu, p), p) ** (1.0 / p)
    tol = _grid_tolerance(grid, mu, nu)
    hard = dirac and p == 2.0
    return CheckReport("nonexpansive", lhs, rhs, tol, mu.dim, p, seed,
                       hard=hard, metadata={"dirac": dirac})


# ---------------------------------------------------------------------------
# barycenter preservation at p = 2


def check_barycenter_preservation(mu: DiscreteMeasure, lam: float = 1.0,
                                  grid: GridSpec | None = None,
                                  seed=None) -> CheckReport:
    """lhs = |barycenter shift| under projection, rhs = 0."""
    if mu.dim == 1:
        pm = project_discrete_exact(mu, lam)
        delta = abs(pm.mean() - float(mu.barycenter()[0]))
        return CheckReport("barycenter_preservation", delta, 0.0, 1e-9, 1,
                           2.0, seed)
    if grid is None:
        raise InvalidSpecError("grid required for d >= 2")
    rho, _ = project_capacitated(CapacitatedInstance(mu, grid, lam, 2.0))
    delta = float(np.linalg.norm(rho.barycenter() - mu.barycenter()))
    tol = 2.0 * float(grid.spacing.max())
    return CheckReport("barycenter_preservation", delta, 0.0, tol, mu.dim,
                       2.0, seed)


# ---------------------------------------------------------------------------
# translation invariance of the distance drop


def check_translation_invariance(mu: DiscreteMeasure, nu: DiscreteMeasure,
                                 h, lam: float = 1.0,
                                 grid: GridSpec | None = None,
                                 seed=None) -> CheckReport:
    """Both sides of the translation identity; lhs = |difference|, rhs = 0.

    The identity: W2^2(mu,nu) - W2^2(P mu, P nu) is unchanged when nu is
    translated.  For grids, h must be a whole number of cells so both
    projections live on the same lattice.
    """
    h = np.asarray(h, dtype=np.float64).reshape(-1)
    if mu.dim == 1:
        pm = project_discrete_exact(mu, lam)
        pn = project_discrete_exact(nu, lam)
        pnh = project_discrete_exact(nu.translate(h), lam)
        side1 = (wasserstein_1d(mu, nu, 2.0) ** 2
                 - pm.lp_distance(pn, 2.0) ** 2)
        side2 = (wasserstein_1d(mu, nu.translate(h), 2.0) ** 2
                 - pm.lp_distance(pnh, 2.0) ** 2)
        return CheckReport("translation_invariance", abs(side1 - side2), 0.0,
                           1e-6, 1, 2.0, seed, metadata={"h": h.tolist()})
    if grid is None:
        raise InvalidSpecError("grid required for d >= 2")
    cells = h / grid.spacing
    if np.abs(cells - np.round(cells)).max() > 1e-9:
        raise InvalidSpecError("translation must be grid-commensurate")
    rho, _ = project_capacitated(CapacitatedInstance(mu, grid, lam, 2.0))
    sig, _ = project_capacitated(CapacitatedInstance(nu, grid, lam, 2.0))
    nuh = nu.translate(h)
    sigh, _ = project_capacitated(
        CapacitatedInstance(nuh, grid.translate(h), lam, 2.0))
    rd = rho.as_discrete()
    side1 = (plan_cost(solve_exact(mu, nu, 2.0), 2.0)
             - plan_cost(solve_exact(rd, sig.as_discrete(), 2.0), 2.0))
    side2 = (plan_cost(solve_exact(mu, nuh, 2.0), 2.0)
             - plan_cost(solve_exact(rd, sigh.as_discrete(), 2.0), 2.0))
    tol = _grid_tolerance(grid, mu, nu)
    return CheckReport("translation_invariance", abs(side1 - side2), 0.0, tol,
                       mu.dim, 2.0, seed, metadata={"h": h.tolist()})


# ---------------------------------------------------------------------------
# geodesic convexity of the cap in one dimension


def check_geodesic_density_bound_1d(mu0, mu1, t_list=(0.1, 0.25, 0.5, 0.75, 0.9),
                                    n: int = 2048, seed=None) -> CheckReport:
    """Displacement interpolants of capped measures stay capped (lam = 1).

    lhs = max reconstructed density over the interpolation times, rhs = 1.
    Inputs: 1-D measures (or quantiles) with density <= 1.
    """
    q0 = quantile_of(mu0)
    q1 = quantile_of(mu1)
    ti = (np.arange(n) + 0.5) / n
    s0 = q0(ti)
    s1 = q1(ti)
    floor = (1.0 / n) / (1.0 + 1e-9)
    for name, s in (("mu0", s0), ("mu1", s1)):
        if np.diff(s).min() < floor:
            raise InfeasibleInputError(f"{name} violates the unit density cap")
    worst = 0.0
    for t in t_list:
        inc = np.diff((1.0 - t) * s0 + t * s1)
        worst = max(worst, (1.0 / n) / inc.min())
    return CheckReport("geodesic_density_bound", worst, 1.0, 1e-9, 1, 2.0,
                       seed, metadata={"n": n, "t_list": list(t_list)})


# ---------------------------------------------------------------------------
# instance generators


def random_discrete(rng: np.random.Generator, d: int, max_atoms: int = 8,
                    box: float = 1.0) -> DiscreteMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    pts = rng.uniform(0.0, box, size=(k, d))
    w = rng.random(k) + 0.05
    return new_discrete(pts, w)


def random_block_quantile_1d(rng: np.random.Generator,
                             max_blocks: int = 4) -> QuantileFn:
    """Quantile of a union of disjoint unit-density intervals (mass one)."""
    k = int(rng.integers(1, max_blocks + 1))
    lengths = rng.random(k) + 0.1
    lengths = lengths / lengths.sum()
    gaps = rng.random(k) * 0.5
    t = np.concatenate(([0.0], np.cumsum(lengths)))
    t /= t[-1]
    starts = np.cumsum(gaps) + np.concatenate(([0.0], np.cumsum(lengths)[:-1]))
    return QuantileFn(t, starts, starts + lengths, mode="linear")


# ---------------------------------------------------------------------------
# discontinuity of the optimal plan vs continuity of the glued plan


def matching_support(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float = 2.0,
                     mass_tol: float = 1e-9) -> set:
    """Index pairs carrying mass in an optimal plan."""
    plan = solve_exact(mu, nu, p)
    return {(int(a), int(b)) for a, b, f in zip(plan.i, plan.j, plan.mass)
            if f > mass_tol}


def glued_support_across_flip(eps: float = 0.1, R: float = 2.0, n: int = 400,
                              seed: int = 0, mass_tol: float = 1e-6):
    """Supports of glued plans for the two-atom family at the flip point.

    mu has atoms at (+-R, 0); nu_t at (t, 1) and (-t, -1).  The optimal
    matching flips as t crosses 0 while the glued plan (through the
    projections) keeps the same support.  The -eps instance mirrors the
    +eps one across the x2-axis, sample for sample, so the middle coupling
    is entry-for-entry identical and only the gluing legs differ.

    Returns (optimal support at +eps, at -eps, glued support at +eps, at -eps).
    """
    def instance(t):
        mu = new_discrete([[R, 0.0], [-R, 0.0]], [0.5, 0.5])
        nu = new_discrete([[t, 1.0], [-t, -1.0]], [0.5, 0.5])
        return mu, nu

    if n % 2:
        raise InvalidSpecError("need an even sample count")
    mu_p, nu_p = instance(eps)
    mu_m, nu_m = instance(-eps)
    opt_p = matching_support(mu_p, nu_p)
    opt_m = matching_support(mu_m, nu_m)

    rng = np.random.default_rng(seed)
    rho_hat, rho_owner = _stratified_ball_samples(mu_p, 1.0, n, rng)
    sig_hat, sig_owner = _stratified_ball_samples(nu_p, 1.0, n, rng)

    def mirror(m: DiscreteMeasure) -> DiscreteMeasure:
        pts = m.points.copy()
        pts[:, 0] = -pts[:, 0]
        return DiscreteMeasure(pts, m.weights)

    def map_plan(samples: DiscreteMeasure, owner, atoms: DiscreteMeasure):
        """Plan pushing each sample to its own ball's atom (the map T)."""
        return TransportPlan(samples, atoms, np.arange(samples.size),
                             owner.astype(np.int64), samples.weights)

    supports = {}
    # mu is mirror-invariant but its atom order flips roles: mirrored
    # samples of atom 0's ball sit on atom 1.
    flip = np.array([1, 0])
    for sign, mu_s, nu_s, rh, sh, own_r, own_s in (
            (+1, mu_p, nu_p, rho_hat, sig_hat, rho_owner, sig_owner),
            (-1, mu_m, nu_m, mirror(rho_hat), mirror(sig_hat),
             flip[rho_owner], sig_owner)):
        eta = solve_exact(rh, sh, 2.0)
        a = map_plan(rh, own_r, mu_s)
        b = map_plan(sh, own_s, nu_s)
        gamma = glue(eta, a, b)
        supports[sign] = {(int(x), int(y)) for x, y, f in
                          zip(gamma.i, gamma.j, gamma.mass) if f > mass_tol}
    return opt_p, opt_m, supports[+1], supports[-1]


def _stratified_ball_samples(atoms: DiscreteMeasure, lam: float, n: int,
                             rng: np.random.Generator):
    """Uniform samples of the analytic projection, exactly w_i * n per ball.

    Returns (samples, owner) with owner mapping each sample to its atom, so
    the induced map plan couples the empirical measure with `atoms` exactly.
    """
    from .measures import rad_ball

    counts = np.round(atoms.weights * n).astype(int)
    counts[-1] += n - counts.sum()
    if np.any(counts <= 0):
        raise InvalidSpecError("sample count too small for the atom weights")
    d = atoms.dim
    pts = np.empty((n, d))
    owner = np.empty(n, dtype=np.int64)
    pos = 0
    for k, (c, w, cnt) in enumerate(zip(atoms.points, atoms.weights, counts)):
        r = rad_ball(d, w / lam)
        g = rng.normal(size=(cnt, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.random(cnt) ** (1.0 / d)
        pts[pos:pos + cnt] = c + r * g * u[:, None]
        owner[pos:pos + cnt] = k
        pos += cnt
    return DiscreteMeasure(pts, np.full(n, 1.0 / n)), owner
