"""Command-line entry point.

Subcommands: project1d, projectnd, wp, verify, counterexample, threshold.
Reports are CSV (default) or JSON with the resolved configuration echoed in
the header; given the same seed they are byte-identical up to the timestamp
line, which --no-timestamp suppresses.  Exit codes: 0 success, 1 check-suite
failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import _kernels
from .errors import WprojError
from .measures import GridSpec, load_measure, measure_to_json, save_measure
from .ot import plan_cost, solve_exact, wasserstein_1d
from .proj1d import ProjectionSpec1D, project_measure_1d
from .projnd import CapacitatedInstance, auto_grid, project_capacitated
from .props import (
    check_barycenter_preservation,
    check_geodesic_density_bound_1d,
    check_nonexpansive,
    check_translation_invariance,
    check_weak_nonexpansiveness,
    random_block_quantile_1d,
    random_discrete,
)
from .experiments import find_p_threshold, gap_curve

__all__ = ["main"]


def _default_seed() -> int:
    return int(os.environ.get("WPROJ_SEED", "0"))


def _parse_grid(values, dim: int) -> GridSpec:
    """--grid 'x0,x1,n' per axis (one value broadcasts to all axes)."""
    if len(values) == 1 and dim > 1:
        values = values * dim
    if len(values) != dim:
        raise argparse.ArgumentTypeError(
            f"need 1 or {dim} --grid specs, got {len(values)}")
    origin, spacing, shape = [], [], []
    for v in values:
        lo, hi, cells = v.split(",")
        lo, hi, cells = float(lo), float(hi), int(cells)
        if cells < 1 or hi <= lo:
            raise argparse.ArgumentTypeError(f"bad grid axis {v!r}")
        origin.append(lo)
        spacing.append((hi - lo) / cells)
        shape.append(cells)
    return GridSpec(origin, spacing, tuple(shape))


class Reporter:
    """Serialized CSV/JSON writer with a config-echo header."""

    def __init__(self, args, columns):
        self.fmt = args.format
        self.columns = columns
        self.rows = []
        self.config = {k: v for k, v in sorted(vars(args).items())
                       if k not in ("func", "out") and v is not None}
        self.timestamp = None if args.no_timestamp else time.strftime(
            "%Y-%m-%dT%H:%M:%S")

    def add(self, row: dict) -> None:
        self.rows.append(row)

    def dump(self, path=None) -> None:
        if self.fmt == "json":
            payload = {"config": {k: str(v) for k, v in self.config.items()},
                       "rows": self.rows}
            if self.timestamp:
                payload["timestamp"] = self.timestamp
            text = json.dumps(payload, indent=1) + "\n"
        else:
            buf = io.StringIO()
            if self.timestamp:
                buf.write(f"# timestamp={self.timestamp}\n")
            cfg = " ".join(f"{k}={v}" for k, v in self.config.items())
            buf.write(f"# config: {cfg}\n")
            writer = csv.DictWriter(buf, fieldnames=self.columns)
            writer.writeheader()
            for row in self.rows:
                writer.writerow(row)
            text = buf.getvalue()
        if path:
            with open(path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)


def _cmd_project1d(args) -> int:
    mu = load_measure(args.input)
    spec = ProjectionSpec1D(p=args.p, lam=args.lam, n=args.n)
    rho = project_measure_1d(mu, spec, cells=args.cells)
    if args.out:
        save_measure(rho, args.out)
    else:
        json.dump(measure_to_json(rho), sys.stdout)
        sys.stdout.write("\n")
    return 0


def _cmd_projectnd(args) -> int:
    mu = load_measure(args.input)
    grid = _parse_grid(args.grid, mu.dim)
    inst = CapacitatedInstance(mu, grid, args.lam, args.p)
    rho, plan = project_capacitated(inst)
    if args.out:
        save_measure(rho, args.out)
    else:
        json.dump(measure_to_json(rho), sys.stdout)
        sys.stdout.write("\n")
    if args.plan:
        with open(args.plan, "w") as fh:
            json.dump(plan.to_json(), fh)
            fh.write("\n")
    cost = plan_cost(plan, args.p)
    print(f"wp_distance={cost ** (1.0 / args.p)!r}", file=sys.stderr)
    return 0


def _cmd_wp(args) -> int:
    a = load_measure(args.a)
    b = load_measure(args.b)
    if getattr(a, "dim", None) == 1 and getattr(b, "dim", None) == 1:
        val = wasserstein_1d(a, b, args.p)
    else:
        val = plan_cost(solve_exact(a, b, args.p), args.p) ** (1.0 / args.p)
    print(repr(val))
    return 0


def _verify_instances_1d(seed: int, lam: float, p: float = 2.0):
    rng = np.random.default_rng(seed)
    mu = random_discrete(rng, 1, max_atoms=8)
    nu = random_discrete(rng, 1, max_atoms=8)
    h = rng.uniform(-1.0, 1.0, size=1)
    out = [
        check_nonexpansive(mu, nu, p, lam, seed=seed),
        check_weak_nonexpansiveness(mu, nu, lam, seed=seed),
        check_barycenter_preservation(mu, lam, seed=seed),
        check_translation_invariance(mu, nu, h, lam, seed=seed),
    ]
    if lam == 1.0:
        q0 = random_block_quantile_1d(rng)
        q1 = random_block_quantile_1d(rng)
        out.append(check_geodesic_density_bound_1d(q0, q1, seed=seed))
    return out


def _verify_instances_nd(seed: int, d: int, lam: float, spacing: float):
    rng = np.random.default_rng(seed)
    mu = random_discrete(rng, d, max_atoms=3)
    nu = random_discrete(rng, d, max_atoms=3)
    grid = auto_grid([mu, nu], lam, spacing)
    h = grid.spacing * rng.integers(1, 4, size=d)
    dirac = random_discrete(rng, d, max_atoms=1)
    return [
        check_weak_nonexpansiveness(mu, nu, lam, grid, seed=seed),
        check_barycenter_preservation(mu, lam, grid, seed=seed),
        check_translation_invariance(mu, nu, h, lam, grid, seed=seed),
        check_nonexpansive(mu, dirac, 2.0, lam, grid, seed=seed),
    ]


def _cmd_verify(args) -> int:
    rep = Reporter(args, ["name", "d", "p", "lhs", "rhs", "slack",
                          "tolerance", "pass", "seed"])
    seeds = range(args.seed, args.seed + args.seeds)

    def run(seed):
        if args.d == 1:
            return _verify_instances_1d(seed, args.lam, args.p)
        return _verify_instances_nd(seed, args.d, args.lam, args.spacing)

    failures = 0
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        for reports in pool.map(run, seeds):
            for r in reports:
                rep.add(r.row())
                if r.hard and not r.passed:
                    failures += 1
    rep.dump(args.out)
    if failures:
        print(f"{failures} hard check(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_counterexample(args) -> int:
    rep = Reporter(args, ["d", "p", "n", "seed", "mode", "wp_mu_nu",
                          "wp_rho_sigma", "gap"])
    p_list = [float(x) for x in args.p_list.split(",")]
    jobs = [(d, seed) for d in args.d for seed in
            range(args.seed, args.seed + args.seeds)]

    def run(job):
        d, seed = job
        return gap_curve(d, p_list, n=args.n, seed=seed, mode=args.mode)

    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        for records in pool.map(run, jobs):
            for rec in records:
                rep.add(rec.row())
    rep.dump(args.out)
    return 0


def _cmd_threshold(args) -> int:
    rep = Reporter(args, ["d", "p_hat", "tol_p", "n", "seeds",
                          "p_hat_sd"])
    for d in args.d:
        vals = []
        for seed in range(args.seed, args.seed + args.seeds):
            p_hat, _ = find_p_threshold(d, tol_p=args.tol_p, n=args.n,
                                        seed=seed, mode=args.mode)
            vals.append(p_hat)
        rep.add({"d": d, "p_hat": repr(float(np.mean(vals))),
                 "tol_p": args.tol_p, "n": args.n, "seeds": args.seeds,
                 "p_hat_sd": repr(float(np.std(vals)))})
    rep.dump(args.out)
    return 0


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=_default_seed(),
                    help="base RNG seed (env WPROJ_SEED)")
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.add_argument("--out", help="write the report here instead of stdout")
    sp.add_argument("--no-timestamp", action="store_true",
                    help="omit the timestamp header line")
    sp.add_argument("--jobs", type=int, default=1,
                    help="parallel check workers")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="wproj",
        description="metric projections onto density-capped measures "
                    f"(kernel backend: {_kernels.BACKEND})")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("project1d", help="1-D projection via quantiles")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--n", type=int, default=4096, help="quantile samples")
    sp.add_argument("--cells", type=int, default=None, help="output grid cells")
    sp.add_argument("--out")
    sp.set_defaults(func=_cmd_project1d)

    sp = sub.add_parser("projectnd", help="grid projection via capacitated flow")
    sp.add_argument("--input", required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--grid", action="append", required=True,
                    metavar="x0,x1,n", help="one per axis, or one for all")
    sp.add_argument("--out")
    sp.add_argument("--plan", help="write the optimal plan JSON here")
    sp.set_defaults(func=_cmd_projectnd)

    sp = sub.add_parser("wp", help="W_p distance between two measure files")
    sp.add_argument("--a", required=True)
    sp.add_argument("--b", required=True)
    sp.add_argument("--p", type=float, default=2.0)
    sp.set_defaults(func=_cmd_wp)

    sp = sub.add_parser("verify", help="run the property-check suite")
    sp.add_argument("--d", type=int, default=1, choices=(1, 2, 3))
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--lambda", dest="lam", type=float, default=1.0)
    sp.add_argument("--seeds", type=int, default=20,
                    help="number of random instances")
    sp.add_argument("--spacing", type=float, default=0.08,
                    help="grid spacing for d >= 2 checks")
    _add_common(sp)
    sp.set_defaults(func=_cmd_verify)

    sp = sub.add_parser("counterexample", help="gap curves for the small-p instances")
    sp.add_argument("--d", type=int, action="append", required=True)
    sp.add_argument("--p-list", default="1.0,1.2,1.4,1.6,1.8,2.0")
    sp.add_argument("--n", type=int, default=2000)
    sp.add_argument("--mode", choices=("sample", "qmc", "grid"), default="sample")
    sp.add_argument("--seeds", type=int, default=1)
    _add_common(sp)
    sp.set_defaults(func=_cmd_counterexample)

    sp = sub.add_parser("threshold", help="bisect the gap sign change in p")
    sp.add_argument("--d", type=int, action="append", required=True)
    sp.add_argument("--tol-p", type=float, default=0.05)
    sp.add_argument("--n", type=int, default=1000)
    sp.add_argument("--mode", choices=("sample", "qmc", "grid"), default="sample")
    sp.add_argument("--seeds", type=int, default=10)
    _add_common(sp)
    sp.set_defaults(func=_cmd_threshold)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except WprojError as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
