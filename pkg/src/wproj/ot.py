"""Exact discrete optimal transport and the one-dimensional quantile calculus.

`solve_exact` runs the network-simplex kernel on the dense bipartite
transportation problem; plans are sparse couplings whose marginals are
checked at construction.  `QuantileFn` holds generalized inverse CDFs as
piecewise-affine segments (step quantiles of atomic measures, linear
quantiles of densities) and integrates |Q1 - Q2|^p segment by segment in
closed form, which is the whole of one-dimensional W_p.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import (
    DimMismatchError,
    InvalidSpecError,
    MarginalMismatchError,
    SizeLimitError,
)
from .measures import DiscreteMeasure, GridMeasure, new_discrete

__all__ = [
    "SOLVE_SIZE_LIMIT",
    "TransportPlan",
    "QuantileFn",
    "validate_exponent",
    "solve_exact",
    "plan_cost",
    "wasserstein_1d",
    "quantile_of",
    "check_cyclical_monotonicity",
    "translate_plan",
    "glue",
]

SOLVE_SIZE_LIMIT = 10_000_000  # max n*m for the exact solver


def validate_exponent(p: float) -> float:
    """Cost exponent for |x-y|^p; p >= 1 (p = 1 for W_1 analysis only)."""
    p = float(p)
    if not p >= 1.0:
        raise InvalidSpecError(f"cost exponent must be >= 1, got {p}")
    return p


# ---------------------------------------------------------------------------
# transport plans


@dataclass(frozen=True)
class TransportPlan:
    """Sparse coupling between two discrete measures."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    i: np.ndarray  # (k,) source atom indices
    j: np.ndarray  # (k,) target atom indices
    mass: np.ndarray  # (k,) positive

    def __post_init__(self):
        i = np.asarray(self.i, dtype=np.int64)
        j = np.asarray(self.j, dtype=np.int64)
        m = np.asarray(self.mass, dtype=np.float64)
        if not (i.shape == j.shape == m.shape):
            raise DimMismatchError("entry arrays must share a shape")
        if m.size and m.min() <= 0:
            raise InvalidSpecError("entry masses must be positive")
        row = np.zeros(self.source.size)
        col = np.zeros(self.target.size)
        np.add.at(row, i, m)
        np.add.at(col, j, m)
        if np.abs(row - self.source.weights).max() > 1e-9:
            raise MarginalMismatchError("row sums do not match source weights")
        if np.abs(col - self.target.weights).max() > 1e-9:
            raise MarginalMismatchError("column sums do not match target weights")
        for name, arr in (("i", i), ("j", j), ("mass", m)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def size(self) -> int:
        return self.mass.size

    def displacements(self) -> np.ndarray:
        return self.source.points[self.i] - self.target.points[self.j]

    def cost(self, p: float) -> float:
        return plan_cost(self, p)

    def to_json(self) -> dict:
        return {"entries": [[int(a), int(b), float(f)] for a, b, f in
                            zip(self.i, self.j, self.mass)]}

    @classmethod
    def from_json(cls, source, target, obj) -> "TransportPlan":
        entries = np.asarray(obj["entries"], dtype=np.float64).reshape(-1, 3)
        return cls(source, target, entries[:, 0].astype(np.int64),
                   entries[:, 1].astype(np.int64), entries[:, 2])


def _pairwise_dist(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Euclidean distance matrix, numerically clean near zero."""
    d2 = ((x[:, None, :] - y[None, :, :]) ** 2).sum(axis=2)
    np.maximum(d2, 0.0, out=d2)
    return np.sqrt(d2)


def cost_matrix(x: np.ndarray, y: np.ndarray, p: float) -> np.ndarray:
    d = _pairwise_dist(x, y)
    if p == 2.0:
        return d * d
    if p == 1.0:
        return d
    return d ** p


def solve_exact(mu: DiscreteMeasure, nu: DiscreteMeasure, p: float,
                warm: TransportPlan | None = None) -> TransportPlan:
    """Optimal plan for cost |x-y|^p by network simplex (exact, not entropic).

    ``warm`` reuses the basis tree of a previous plan on the *same* pair of
    measures (costs may differ, e.g. another p).
    """
    p = validate_exponent(p)
    if mu.dim != nu.dim:
        raise DimMismatchError(f"dim {mu.dim} vs {nu.dim}")
    if mu.size * nu.size > SOLVE_SIZE_LIMIT:
        raise SizeLimitError(
            f"{mu.size} x {nu.size} exceeds {SOLVE_SIZE_LIMIT} arcs")
    C = cost_matrix(mu.points, nu.points, p)
    init = None
    if warm is not None:
        basis = getattr(warm, "basis", None)
        if basis is not None and basis[0].size == mu.size + nu.size - 1:
            init = basis
    bi, bj, flow, _ = _kernels.solve_transportation(
        mu.weights, nu.weights, C, init=init)
    keep = flow > 0.0
    plan = TransportPlan(mu, nu, bi[keep].astype(np.int64),
                         bj[keep].astype(np.int64), flow[keep])
    object.__setattr__(plan, "basis", (bi, bj))
    return plan


def plan_cost(plan: TransportPlan, p: float) -> float:
    """Transport cost sum mass * |x - y|^p of the plan (not a root)."""
    p = validate_exponent(p)
    d = np.linalg.norm(plan.displacements(), axis=1)
    if p == 1.0:
        return float(plan.mass @ d)
    return float(plan.mass @ d ** p)


def translate_plan(plan: TransportPlan, h) -> TransportPlan:
    """Shift the target measure by h, keeping the same entries.

    If the input is optimal for p = 2, the output is optimal between the
    source and the translated target (cyclically monotone support is
    preserved under translation).
    """
    return TransportPlan(plan.source, plan.target.translate(h),
                         plan.i, plan.j, plan.mass)


def check_cyclical_monotonicity(plan: TransportPlan, p: float, k: int = 3,
                                trials: int = 1000, seed=0):
    """Sample k-tuples of support pairs and test cyclical monotonicity.

    Returns (ok, worst) where worst is the largest violation found: the
    excess of the plan's own pairing cost over the best reshuffling
    (cyclic shifts; all permutations when k <= 4).
    """
    p = validate_exponent(p)
    if k < 2:
        raise InvalidSpecError("need tuples of size k >= 2")
    rng = np.random.default_rng(seed)
    xs = plan.source.points[plan.i]
    ys = plan.target.points[plan.j]
    nent = plan.size
    if k <= 4:
        perms = [np.array(s) for s in itertools.permutations(range(k))
                 if any(s[t] != t for t in range(k))]
    else:
        base = np.arange(k)
        perms = [np.roll(base, -r) for r in range(1, k)]
    worst = 0.0
    for _ in range(trials):
        idx = rng.integers(0, nent, size=k)
        x = xs[idx]
        y = ys[idx]
        own = (np.linalg.norm(x - y, axis=1) ** p).sum()
        for s in perms:
            alt = (np.linalg.norm(x - y[s], axis=1) ** p).sum()
            if own - alt > worst:
                worst = own - alt
    scale = max(1.0, abs(plan_cost(plan, p)))
    return worst <= 1e-9 * scale, worst


def glue(eta: TransportPlan, a: TransportPlan, b: TransportPlan) -> TransportPlan:
    """Compose plans through the shared middle marginals.

    eta couples (rho, sigma); a couples (rho, mu); b couples (sigma, nu).
    The result couples (mu, nu) with
    gamma(x, y) = sum_{i,j} eta(i,j) a(i->x)/rho_i b(j->y)/sigma_j.
    """
    _require_same_measure(eta.source, a.source, "eta.source vs a.source")
    _require_same_measure(eta.target, b.source, "eta.target vs b.source")
    rho_w = eta.source.weights
    sig_w = eta.target.weights

    a_by_src = [[] for _ in range(a.source.size)]
    for ii, xx, mm in zip(a.i, a.j, a.mass):
        a_by_src[ii].append((xx, mm))
    b_by_src = [[] for _ in range(b.source.size)]
    for jj, yy, mm in zip(b.i, b.j, b.mass):
        b_by_src[jj].append((yy, mm))

    acc = {}
    for ii, jj, mm in zip(eta.i, eta.j, eta.mass):
        base = mm / (rho_w[ii] * sig_w[jj])
        for xx, ma in a_by_src[ii]:
            w = base * ma
            for yy, mb in b_by_src[jj]:
                key = (int(xx), int(yy))
                acc[key] = acc.get(key, 0.0) + w * mb
    keys = sorted(acc)
    gi = np.array([k[0] for k in keys], dtype=np.int64)
    gj = np.array([k[1] for k in keys], dtype=np.int64)
    gm = np.array([acc[k] for k in keys])
    return TransportPlan(a.target, b.target, gi, gj, gm)


def _require_same_measure(x: DiscreteMeasure, y: DiscreteMeasure, label: str):
    if (x.size != y.size or np.abs(x.points - y.points).max() > 1e-12
            or np.abs(x.weights - y.weights).max() > 1e-12):
        raise MarginalMismatchError(f"shared marginal mismatch: {label}")


# ---------------------------------------------------------------------------
# quantile functions and 1-D W_p


@dataclass(frozen=True)
class QuantileFn:
    """Nondecreasing piecewise-affine quantile on [0, 1].

    Segment k covers [t[k], t[k+1]) with affine values from vleft[k] to
    vright[k]; jumps between segments are allowed (gaps in the support).
    Step quantiles have vleft == vright per segment.
    """

    t: np.ndarray  # (m+1,), 0 = t_0 < ... < t_m = 1
    vleft: np.ndarray  # (m,)
    vright: np.ndarray  # (m,)
    mode: str = "step"

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.float64)
        vl = np.asarray(self.vleft, dtype=np.float64)
        vr = np.asarray(self.vright, dtype=np.float64)
        if t.ndim != 1 or t.size < 2 or vl.shape != vr.shape or vl.size != t.size - 1:
            raise InvalidSpecError("need m+1 breakpoints and m segment values")
        if abs(t[0]) > 1e-12 or abs(t[-1] - 1.0) > 1e-12:
            raise InvalidSpecError("breakpoints must run from 0 to 1")
        if np.any(np.diff(t) <= 0):
            raise InvalidSpecError("breakpoints must be strictly increasing")
        if np.any(vr - vl < -1e-9) or np.any(vl[1:] - vr[:-1] < -1e-9):
            raise InvalidSpecError("quantile values must be nondecreasing")
        for name, arr in (("t", t), ("vleft", vl), ("vright", vr)):
            arr = np.ascontiguousarray(arr)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_step(cls, breaks, values) -> "QuantileFn":
        v = np.asarray(values, dtype=np.float64)
        return cls(breaks, v, v, mode="step")

    @classmethod
    def from_linear(cls, breaks, values) -> "QuantileFn":
        v = np.asarray(values, dtype=np.float64)
        return cls(breaks, v[:-1], v[1:], mode="linear")

    @property
    def nseg(self) -> int:
        return self.vleft.size

    def __call__(self, tq) -> np.ndarray:
        tq = np.asarray(tq, dtype=np.float64)
        k = np.clip(np.searchsorted(self.t, tq, side="right") - 1, 0, self.nseg - 1)
        t0, t1 = self.t[k], self.t[k + 1]
        lam = (tq - t0) / (t1 - t0)
        return self.vleft[k] + lam * (self.vright[k] - self.vleft[k])

    def mean(self) -> float:
        return float(((self.vleft + self.vright) / 2.0) @ np.diff(self.t))

    def min_slope(self) -> float:
        """Smallest within-segment slope (density upper bound = 1/min_slope)."""
        return float(((self.vright - self.vleft) / np.diff(self.t)).min())

    def cdf(self, x) -> np.ndarray:
        """Total mass at or below x (inverse of the quantile)."""
        x = np.asarray(x, dtype=np.float64)
        out = np.empty(x.shape)
        flat = np.ravel(x)
        res = np.empty(flat.shape)
        for idx, xx in enumerate(flat):
            k = int(np.searchsorted(self.vright, xx, side="left"))
            if k >= self.nseg:
                res[idx] = 1.0
            elif xx < self.vleft[k]:
                res[idx] = self.t[k]
            elif self.vright[k] == self.vleft[k]:
                res[idx] = self.t[k + 1]
            else:
                lam = (xx - self.vleft[k]) / (self.vright[k] - self.vleft[k])
                res[idx] = self.t[k] + lam * (self.t[k + 1] - self.t[k])
        out.flat = res
        return out

    def lp_distance(self, other: "QuantileFn", p: float) -> float:
        """L^p([0,1]) distance between the two quantiles (= W_p in 1-D)."""
        p = validate_exponent(p)
        return float(_lp_segment_integral(self, other, p)) ** (1.0 / p)


def _affine_abs_power_integral(A: float, B: float, L: float, p: float) -> float:
    """Integral of |g|^p over [0, L] for affine g from A to B."""
    if L <= 0.0:
        return 0.0
    if abs(B - A) <= 1e-12 * (abs(A) + abs(B)) or A == B:
        return abs(0.5 * (A + B)) ** p * L
    q = p + 1.0
    fa = np.sign(A) * abs(A) ** q
    fb = np.sign(B) * abs(B) ** q
    return (fb - fa) / (B - A) * L / q


def _lp_segment_integral(qa: QuantileFn, qb: QuantileFn, p: float) -> float:
    ts = np.unique(np.concatenate((qa.t, qb.t)))
    total = 0.0
    ka = kb = 0
    for s, e in zip(ts[:-1], ts[1:]):
        while qa.t[ka + 1] <= s and ka < qa.nseg - 1:
            ka += 1
        while qb.t[kb + 1] <= s and kb < qb.nseg - 1:
            kb += 1
        la0, la1 = qa.t[ka], qa.t[ka + 1]
        lb0, lb1 = qb.t[kb], qb.t[kb + 1]
        va_s = qa.vleft[ka] + (s - la0) / (la1 - la0) * (qa.vright[ka] - qa.vleft[ka])
        va_e = qa.vleft[ka] + (e - la0) / (la1 - la0) * (qa.vright[ka] - qa.vleft[ka])
        vb_s = qb.vleft[kb] + (s - lb0) / (lb1 - lb0) * (qb.vright[kb] - qb.vleft[kb])
        vb_e = qb.vleft[kb] + (e - lb0) / (lb1 - lb0) * (qb.vright[kb] - qb.vleft[kb])
        total += _affine_abs_power_integral(va_s - vb_s, va_e - vb_e, e - s, p)
    return total


def quantile_of(m) -> QuantileFn:
    """Quantile function of a 1-D measure (atoms -> step, grid -> linear)."""
    if isinstance(m, QuantileFn):
        return m
    if isinstance(m, DiscreteMeasure):
        if m.dim != 1:
            raise DimMismatchError("quantiles need 1-D measures")
        order = np.argsort(m.points[:, 0], kind="stable")
        x = m.points[order, 0]
        w = m.weights[order]
        # merge coincident atoms
        keep = np.concatenate(([True], np.diff(x) > 0))
        idx = np.cumsum(keep) - 1
        xm = x[keep]
        wm = np.zeros(xm.size)
        np.add.at(wm, idx, w)
        t = np.concatenate(([0.0], np.cumsum(wm)))
        t /= t[-1]  # absorb cumsum drift; keeps t strictly increasing
        return QuantileFn.from_step(t, xm)
    if isinstance(m, GridMeasure):
        if m.dim != 1:
            raise DimMismatchError("quantiles need 1-D measures")
        mass = m.cell_mass
        keep = mass > 0
        if not keep.any():
            raise InvalidSpecError("empty grid measure")
        lo = m.grid.origin[0] + m.grid.spacing[0] * np.flatnonzero(keep)
        hi = lo + m.grid.spacing[0]
        t = np.concatenate(([0.0], np.cumsum(mass[keep])))
        t /= t[-1]
        return QuantileFn(t, lo, hi, mode="linear")
    raise TypeError(f"no quantile for {type(m).__name__}")


def wasserstein_1d(mu, nu, p: float) -> float:
    """Exact 1-D W_p via the quantile isometry (closed-form per segment)."""
    return quantile_of(mu).lp_distance(quantile_of(nu), p)
