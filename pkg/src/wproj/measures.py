"""Measure representations, ball geometry, discretization and sampling.

Three concrete measure types cover everything the projection lab needs:
finite atomic measures (`DiscreteMeasure`), densities on regular grids
(`GridMeasure`), and Lebesgue measure at constant density on a union of
disjoint balls (`BallUnionMeasure`).  All are immutable after construction.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimMismatchError,
    EmptySupportError,
    GridTooCoarseError,
    InvalidSpecError,
    OverlapError,
)

__all__ = [
    "DiscreteMeasure",
    "GridSpec",
    "GridMeasure",
    "BallUnionMeasure",
    "new_discrete",
    "vol_ball",
    "rad_ball",
    "barycenter",
    "translate",
    "discretize_ball_union",
    "sample_ball_union",
    "measure_to_json",
    "measure_from_json",
    "load_measure",
    "save_measure",
]


# ---------------------------------------------------------------------------
# ball geometry


def vol_ball(n: int, r: float) -> float:
    """Volume of the n-ball of radius r: pi^(n/2) r^n / Gamma(n/2+1)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if r < 0:
        raise ValueError("radius must be >= 0")
    if r == 0.0:
        return 0.0
    return math.exp(0.5 * n * math.log(math.pi) + n * math.log(r)
                    - math.lgamma(0.5 * n + 1.0))


def rad_ball(n: int, v: float) -> float:
    """Radius of the n-ball of volume v (inverse of vol_ball in r)."""
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if v < 0:
        raise ValueError("volume must be >= 0")
    if v == 0.0:
        return 0.0
    return math.exp((math.lgamma(0.5 * n + 1.0) + math.log(v)) / n
                    - 0.5 * math.log(math.pi))


# ---------------------------------------------------------------------------
# measure types


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class DiscreteMeasure:
    """Finite weighted point cloud; weights sum to one."""

    points: np.ndarray  # (k, dim)
    weights: np.ndarray  # (k,)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] == 0:
            raise EmptySupportError("need a non-empty (k, dim) point array")
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (pts.shape[0],):
            raise DimMismatchError("weights length must match points")
        if np.any(w < 0):
            raise InvalidSpecError("weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise InvalidSpecError("weights must sum to 1 within 1e-12")
        object.__setattr__(self, "points", _frozen(pts))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def size(self) -> int:
        return self.points.shape[0]

    def barycenter(self) -> np.ndarray:
        return self.weights @ self.points

    def translate(self, h) -> "DiscreteMeasure":
        h = np.broadcast_to(np.asarray(h, dtype=np.float64), (self.dim,))
        return DiscreteMeasure(self.points + h, self.weights)


def new_discrete(points, weights) -> DiscreteMeasure:
    """Build a DiscreteMeasure: renormalize weights, drop zero-weight atoms."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.ndim != 2:
        raise DimMismatchError("points must be a (k, dim) array")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if pts.shape[0] != w.shape[0]:
        raise DimMismatchError("points and weights lengths differ")
    if np.any(w < 0):
        raise InvalidSpecError("weights must be nonnegative")
    total = w.sum()
    if total <= 0:
        raise EmptySupportError("no atom with positive weight")
    keep = w > 0
    return DiscreteMeasure(pts[keep], w[keep] / total)


@dataclass(frozen=True)
class GridSpec:
    """Regular axis-aligned grid of half-open cells [o + k s, o + (k+1) s)."""

    origin: np.ndarray  # (dim,)
    spacing: np.ndarray  # (dim,), positive
    shape: tuple  # cells per axis

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(-1)
        s = np.broadcast_to(np.asarray(self.spacing, dtype=np.float64), o.shape).copy()
        shp = tuple(int(k) for k in np.atleast_1d(self.shape))
        if len(shp) != o.size or any(k < 1 for k in shp):
            raise InvalidSpecError("grid shape must give >= 1 cell per axis")
        if np.any(s <= 0):
            raise InvalidSpecError("grid spacing must be positive")
        object.__setattr__(self, "origin", _frozen(o))
        object.__setattr__(self, "spacing", _frozen(s))
        object.__setattr__(self, "shape", shp)

    @property
    def dim(self) -> int:
        return self.origin.size

    @property
    def ncells(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def upper(self) -> np.ndarray:
        return self.origin + self.spacing * np.asarray(self.shape)

    def centers(self) -> np.ndarray:
        """Cell centers, flattened C-order, shape (ncells, dim)."""
        axes = [self.origin[k] + self.spacing[k] * (np.arange(self.shape[k]) + 0.5)
                for k in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=1)

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return np.all((x >= self.origin) & (x < self.upper), axis=1)

    def translate(self, h) -> "GridSpec":
        h = np.broadcast_to(np.asarray(h, dtype=np.float64), (self.dim,))
        return GridSpec(self.origin + h, self.spacing, self.shape)

    @classmethod
    def cover(cls, low, high, spacing) -> "GridSpec":
        """Smallest grid at the given spacing whose hull contains [low, high]."""
        low = np.asarray(low, dtype=np.float64).reshape(-1)
        high = np.asarray(high, dtype=np.float64).reshape(-1)
        spacing = np.broadcast_to(np.asarray(spacing, dtype=np.float64), low.shape)
        shape = tuple(int(math.ceil((hi - lo) / s)) for lo, hi, s in
                      zip(low, high, spacing))
        return cls(low, spacing, shape)


@dataclass(frozen=True)
class GridMeasure:
    """Per-cell masses on a regular grid, with a density cap field.

    ``capped=True`` asserts membership in the density-capped set (every cell
    mass <= lam * cell volume up to 1e-12); discretized ball unions set
    ``capped=False`` because renormalization can push boundary-cell densities
    slightly above the cap.
    """

    grid: GridSpec
    cell_mass: np.ndarray  # flat, C-order over grid.shape
    lam: float = 1.0
    capped: bool = True
    raw_total: float = field(default=1.0, compare=False)  # pre-normalization mass

    def __post_init__(self):
        cm = np.asarray(self.cell_mass, dtype=np.float64).reshape(-1)
        if cm.size != self.grid.ncells:
            raise DimMismatchError("cell_mass length must match grid shape")
        if np.any(cm < 0):
            raise InvalidSpecError("cell masses must be nonnegative")
        if abs(cm.sum() - 1.0) > 1e-9:
            raise InvalidSpecError("cell masses must sum to 1 within 1e-9")
        if self.lam <= 0:
            raise InvalidSpecError("density cap must be positive")
        if self.capped:
            cap = self.lam * self.grid.cell_volume + 1e-12
            if cm.max() > cap:
                raise InvalidSpecError(
                    f"cell mass {cm.max():.3e} exceeds cap {cap:.3e}")
        object.__setattr__(self, "cell_mass", _frozen(cm))

    @property
    def dim(self) -> int:
        return self.grid.dim

    def max_density(self) -> float:
        return float(self.cell_mass.max()) / self.grid.cell_volume

    def barycenter(self) -> np.ndarray:
        return self.cell_mass @ self.grid.centers()

    def translate(self, h) -> "GridMeasure":
        return GridMeasure(self.grid.translate(h), self.cell_mass, self.lam,
                           self.capped)

    def as_discrete(self, drop_tol: float = 0.0) -> DiscreteMeasure:
        """Atomize onto cell centers (cells with mass > drop_tol)."""
        keep = self.cell_mass > drop_tol
        return new_discrete(self.grid.centers()[keep], self.cell_mass[keep])


@dataclass(frozen=True)
class BallUnionMeasure:
    """Lebesgue measure at density lam on a union of disjoint balls."""

    centers: np.ndarray  # (k, dim)
    radii: np.ndarray  # (k,)
    lam: float = 1.0

    def __post_init__(self):
        c = np.atleast_2d(np.asarray(self.centers, dtype=np.float64))
        r = np.asarray(self.radii, dtype=np.float64).reshape(-1)
        if c.shape[0] != r.size or c.shape[0] == 0:
            raise DimMismatchError("need matching non-empty centers and radii")
        if np.any(r <= 0) or self.lam <= 0:
            raise InvalidSpecError("radii and density must be positive")
        d = c.shape[1]
        total = self.lam * sum(vol_ball(d, ri) for ri in r)
        if abs(total - 1.0) > 1e-12:
            raise InvalidSpecError(
                f"lam * total ball volume = {total!r}, expected 1 within 1e-12")
        for i in range(r.size):
            for j in range(i + 1, r.size):
                gap = np.linalg.norm(c[i] - c[j]) - (r[i] + r[j])
                if gap < -1e-12:
                    raise OverlapError(
                        f"balls {i} and {j} overlap by {-gap:.3e}")
        object.__setattr__(self, "centers", _frozen(c))
        object.__setattr__(self, "radii", _frozen(r))

    @property
    def dim(self) -> int:
        return self.centers.shape[1]

    @property
    def masses(self) -> np.ndarray:
        d = self.dim
        return np.array([self.lam * vol_ball(d, r) for r in self.radii])

    def barycenter(self) -> np.ndarray:
        return self.masses @ self.centers

    def translate(self, h) -> "BallUnionMeasure":
        h = np.broadcast_to(np.asarray(h, dtype=np.float64), (self.dim,))
        return BallUnionMeasure(self.centers + h, self.radii, self.lam)

    def contains(self, x: np.ndarray) -> np.ndarray:
        """Membership of points (rows of x) in the union."""
        x = np.atleast_2d(x)
        inside = np.zeros(x.shape[0], dtype=bool)
        for c, r in zip(self.centers, self.radii):
            inside |= ((x - c) ** 2).sum(axis=1) <= r * r
        return inside

    def bounding_box(self):
        low = (self.centers - self.radii[:, None]).min(axis=0)
        high = (self.centers + self.radii[:, None]).max(axis=0)
        return low, high


# ---------------------------------------------------------------------------
# generic helpers


def barycenter(m) -> np.ndarray:
    return m.barycenter()


def translate(m, h):
    return m.translate(h)


def discretize_ball_union(b: BallUnionMeasure, grid: GridSpec,
                          subsamples: int = 3) -> GridMeasure:
    """Rasterize a ball union: per-cell midpoint rule with subsamples^dim points.

    Cell mass = lam * estimated Lebesgue volume of (cell & union); the result
    is renormalized to total mass one.  The pre-normalization total converges
    to one as the grid refines.
    """
    if grid.dim != b.dim:
        raise DimMismatchError("grid and measure dimensions differ")
    hmax = float(grid.spacing.max())
    if np.any(2.0 * b.radii < 2.0 * hmax):
        raise GridTooCoarseError(
            f"ball diameter {2 * b.radii.min():.4g} below 2*spacing {2 * hmax:.4g}")
    low, high = b.bounding_box()
    if np.any(low < grid.origin - 1e-12) or np.any(high > grid.upper + 1e-12):
        raise InvalidSpecError("grid does not cover the ball union support")

    s = int(subsamples)
    if s < 1:
        raise InvalidSpecError("subsamples must be >= 1")
    # offsets of the s^dim midpoint subsample points within one cell
    steps = [(np.arange(s) + 0.5) / s * grid.spacing[k] for k in range(grid.dim)]
    mesh = np.meshgrid(*steps, indexing="ij")
    offsets = np.stack([m.reshape(-1) for m in mesh], axis=1)  # (s^d, dim)

    corners = grid.centers() - grid.spacing / 2.0
    frac = np.zeros(grid.ncells)
    chunk = max(1, 2_000_000 // max(1, offsets.shape[0]))
    for lo in range(0, grid.ncells, chunk):
        hi = min(lo + chunk, grid.ncells)
        pts = corners[lo:hi, None, :] + offsets[None, :, :]
        inside = b.contains(pts.reshape(-1, grid.dim)).reshape(hi - lo, -1)
        frac[lo:hi] = inside.mean(axis=1)
    mass = b.lam * grid.cell_volume * frac
    total = mass.sum()
    if total <= 0:
        raise InvalidSpecError("grid resolution lost the ball union entirely")
    return GridMeasure(grid, mass / total, b.lam, capped=False,
                       raw_total=float(total))


def sample_ball_union(b: BallUnionMeasure, n: int, seed) -> DiscreteMeasure:
    """n i.i.d. uniform points in the union, equal weights, seeded.

    Balls are chosen with probability proportional to volume; within a ball,
    a uniform point is a scaled Gaussian direction with a U^(1/d) radius.
    """
    if n < 1:
        raise InvalidSpecError("need n >= 1 samples")
    rng = np.random.default_rng(seed)
    d = b.dim
    masses = b.masses
    counts = rng.multinomial(n, masses / masses.sum())
    out = np.empty((n, d))
    pos = 0
    for c, r, k in zip(b.centers, b.radii, counts):
        if k == 0:
            continue
        g = rng.normal(size=(k, d))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        u = rng.random(k) ** (1.0 / d)
        out[pos:pos + k] = c + r * g * u[:, None]
        pos += k
    return new_discrete(out, np.full(n, 1.0 / n))


# ---------------------------------------------------------------------------
# JSON measure format


def measure_to_json(m) -> dict:
    if isinstance(m, DiscreteMeasure):
        return {"type": "discrete", "dim": m.dim,
                "points": m.points.tolist(), "weights": m.weights.tolist()}
    if isinstance(m, GridMeasure):
        return {"type": "grid", "origin": m.grid.origin.tolist(),
                "spacing": m.grid.spacing.tolist(),
                "shape": list(m.grid.shape),
                "cell_mass": m.cell_mass.tolist(), "lambda": m.lam}
    if isinstance(m, BallUnionMeasure):
        return {"type": "ball_union", "centers": m.centers.tolist(),
                "radii": m.radii.tolist(), "lambda": m.lam}
    raise TypeError(f"cannot serialize {type(m).__name__}")


def measure_from_json(obj: dict):
    kind = obj.get("type")
    if kind == "discrete":
        return new_discrete(obj["points"], obj["weights"])
    if kind == "grid":
        spec = GridSpec(obj["origin"], obj["spacing"], tuple(obj["shape"]))
        return GridMeasure(spec, obj["cell_mass"], obj.get("lambda", 1.0),
                           capped=False)
    if kind == "ball_union":
        return BallUnionMeasure(np.asarray(obj["centers"], dtype=np.float64),
                                obj["radii"], obj.get("lambda", 1.0))
    raise InvalidSpecError(f"unknown measure type {kind!r}")


def load_measure(path):
    with open(path) as fh:
        return measure_from_json(json.load(fh))


def save_measure(m, path) -> None:
    with open(path, "w") as fh:
        json.dump(measure_to_json(m), fh)
        fh.write("\n")
