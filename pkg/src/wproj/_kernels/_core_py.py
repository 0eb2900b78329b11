"""Pure-Python/NumPy kernels.

Mirrors the compiled extension ``wproj._kernels._core`` operation for
operation; the two backends follow the same pivot and pooling rules so their
outputs agree to rounding.  This module is the fallback selected at import
time when the extension is unavailable (or WPROJ_FORCE_PYTHON is set).
"""

from __future__ import annotations

import numpy as np

BACKEND = "python"

_PRICE_TOL_REL = 1e-12


def _greedy_basis(a, b, C):
    """Initial basis: row-greedy minimum-cost allocation, completed to a tree.

    Each source sends its supply to the cheapest sinks with remaining
    capacity.  The allocated cells form a forest; zero-flow cells connect
    the components into a spanning tree.
    """
    n, m = a.size, b.size
    ne = n + m - 1
    bi = np.empty(ne, dtype=np.int32)
    bj = np.empty(ne, dtype=np.int32)
    bf = np.empty(ne, dtype=np.float64)
    ra = a.copy()
    rb = b.copy()
    open_cost = np.empty(m, dtype=np.float64)
    k = 0
    for i in range(n):
        while ra[i] > 0.0:
            np.copyto(open_cost, C[i])
            open_cost[rb <= 0.0] = np.inf
            j = int(np.argmin(open_cost))
            if not np.isfinite(open_cost[j]):
                break  # demand exhausted by float dust; re-solve fixes it
            f = ra[i] if ra[i] <= rb[j] else rb[j]
            bi[k] = i
            bj[k] = j
            bf[k] = f
            k += 1
            ra[i] -= f
            rb[j] -= f

    # union-find over nodes (sources 0..n-1, sinks n..n+m-1)
    root = np.arange(n + m, dtype=np.int64)

    def find(v):
        while root[v] != v:
            root[v] = root[root[v]]
            v = root[v]
        return v

    for e in range(k):
        ri, rj = find(bi[e]), find(n + bj[e])
        if ri != rj:
            root[rj] = ri
    # zero-flow cells hook every stray component onto source 0's component
    j0 = int(bj[0]) if k > 0 else 0
    for v in range(n + m):
        rv, r0 = find(v), find(0)
        if rv != r0:
            if v < n:
                bi[k], bj[k], bf[k] = v, j0, 0.0
            else:
                bi[k], bj[k], bf[k] = 0, v - n, 0.0
            root[rv] = r0
            k += 1
    assert k == ne
    return bi, bj, bf


def _tree_arrays(bi, bj, n, m):
    """Parent/edge/depth/potential arrays for the basis tree, rooted at 0."""
    N = n + m
    ne = N - 1
    # adjacency via counting sort; source and sink id ranges are disjoint,
    # so per-node edge lists come out in ascending edge order.
    keys = np.concatenate((bi, bj + n))
    eids = np.concatenate((np.arange(ne), np.arange(ne)))
    order = np.argsort(keys, kind="stable")
    adj = eids[order]
    start = np.zeros(N + 1, dtype=np.int64)
    np.add.at(start, keys + 1, 1)
    np.cumsum(start, out=start)

    parent = np.full(N, -1, dtype=np.int32)
    pedge = np.full(N, -1, dtype=np.int32)
    depth = np.zeros(N, dtype=np.int32)
    visited = np.zeros(N, dtype=bool)
    stack = [0]
    visited[0] = True
    while stack:
        v = stack.pop()
        for k in range(start[v], start[v + 1]):
            e = adj[k]
            w = bi[e] if (bj[e] + n) == v else (bj[e] + n)
            if not visited[w]:
                visited[w] = True
                parent[w] = v
                pedge[w] = e
                depth[w] = depth[v] + 1
                stack.append(w)
    return parent, pedge, depth


def _potentials(bi, bj, C, parent, pedge, depth, n):
    """Dual variables u (sources), v (sinks): u_i + v_j = C_ij on the tree."""
    N = parent.size
    pot = np.zeros(N, dtype=np.float64)
    # process nodes in increasing depth so parents are already set
    order = np.argsort(depth, kind="stable")
    for v in order[1:]:
        e = pedge[v]
        c = C[bi[e], bj[e]]
        pot[v] = c - pot[parent[v]]
    return pot


def _find_entering(Cflat, pot, n, m, next_arc, block, tol):
    """Block-search pricing; returns (arc id, new cursor) or (-1, cursor)."""
    narcs = n * m
    u = pot[:n]
    v = pot[n:]
    scanned = 0
    f = next_arc
    while scanned < narcs:
        l = min(f + block, narcs)
        if l > f:
            ids = np.arange(f, l)
            si = ids // m
            sj = ids - si * m
            r = Cflat[f:l] - u[si] - v[sj]
            k = int(np.argmin(r))
            if r[k] < -tol:
                return f + k, f + k + 1
        scanned += l - f
        f = l
        if f >= narcs:
            f = 0
    return -1, next_arc


def _solve_tree_flows(bi, bj, a, b):
    """Exact flows on the basis tree for the given marginals (leaf elimination)."""
    n, m = a.size, b.size
    N = n + m
    ne = N - 1
    deg = np.zeros(N, dtype=np.int64)
    np.add.at(deg, bi, 1)
    np.add.at(deg, bj + n, 1)
    keys = np.concatenate((bi, bj + n))
    eids = np.concatenate((np.arange(ne), np.arange(ne)))
    order = np.argsort(keys, kind="stable")
    adj = eids[order]
    start = np.zeros(N + 1, dtype=np.int64)
    np.add.at(start, keys + 1, 1)
    np.cumsum(start, out=start)

    res = np.concatenate((a, b)).astype(np.float64)
    flow = np.zeros(ne, dtype=np.float64)
    done_edge = np.zeros(ne, dtype=bool)
    leaves = [v for v in range(N) if deg[v] == 1]
    for _ in range(ne):
        v = leaves.pop()
        e = -1
        for k in range(start[v], start[v + 1]):
            if not done_edge[adj[k]]:
                e = adj[k]
                break
        w = bj[e] + n if v < n else bi[e]
        flow[e] = res[v]
        res[w] -= res[v]
        res[v] = 0.0
        done_edge[e] = True
        deg[w] -= 1
        if deg[w] == 1:
            leaves.append(w)
    return flow


def solve_transportation(a, b, C, tol_rel=_PRICE_TOL_REL, max_pivots=0,
                         perturb=1e-13, block_size=0, init=None):
    """Exact dense transportation problem by primal network simplex.

    a: supplies (n,), b: demands (m,), sum(a) == sum(b); C: costs (n, m).
    Returns (bi, bj, flow, pivots): the n+m-1 basic cells with exact flows
    re-solved from the final tree (zero flows included).

    The pivot phase runs on marginals perturbed by ~perturb*min(weight) to
    break degenerate ties (uniform weights otherwise stall the simplex); the
    returned flows are re-solved on the optimal tree for the exact inputs,
    so marginals hold to rounding.  Tiny negative flows (bounded by the total
    perturbation, << 1e-9) may appear on degenerate cells.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    C = np.ascontiguousarray(C, dtype=np.float64)
    n, m = C.shape
    Cflat = C.reshape(-1)
    tol = tol_rel * max(1.0, float(np.abs(C).max()))
    if max_pivots <= 0:
        max_pivots = 200 * (n + m) + 20000
    block = block_size if block_size > 0 else max(64, 4 * int(np.sqrt(n * m)))

    if perturb > 0.0:
        eps = perturb * min(a.min(), b.min())
        ap = a + eps * np.arange(1, n + 1)
        bp = b.copy()
        bp[m - 1] += eps * (n * (n + 1)) / 2.0
    else:
        ap, bp = a, b
    if init is not None:
        bi, bj = (np.array(x, dtype=np.int32) for x in init)
        bf = np.maximum(_solve_tree_flows(bi, bj, ap, bp), 0.0)
    else:
        bi, bj, bf = _greedy_basis(ap, bp, C)
    next_arc = 0
    pivots = 0
    while True:
        parent, pedge, depth = _tree_arrays(bi, bj, n, m)
        pot = _potentials(bi, bj, C, parent, pedge, depth, n)
        arc, next_arc = _find_entering(Cflat, pot, n, m, next_arc, block, tol)
        if arc < 0:
            break
        pivots += 1
        if pivots > max_pivots:
            from ..errors import SolverStallError

            raise SolverStallError(
                f"transportation simplex exceeded {max_pivots} pivots"
            )
        ei, ej = arc // m, arc % m
        # cycle legs: climb both endpoints to their common ancestor
        x, y = ei, n + ej
        leg_x, leg_y = [], []
        while depth[x] > depth[y]:
            leg_x.append(pedge[x])
            x = parent[x]
        while depth[y] > depth[x]:
            leg_y.append(pedge[y])
            y = parent[y]
        while x != y:
            leg_x.append(pedge[x])
            x = parent[x]
            leg_y.append(pedge[y])
            y = parent[y]
        # flow change: edges at even positions along either leg lose theta
        theta = np.inf
        leave = -1
        for leg in (leg_x, leg_y):
            for k in range(0, len(leg), 2):
                e = leg[k]
                if bf[e] < theta or (bf[e] == theta and e < leave):
                    theta = bf[e]
                    leave = e
        for leg in (leg_x, leg_y):
            for k, e in enumerate(leg):
                if k % 2 == 0:
                    bf[e] -= theta
                else:
                    bf[e] += theta
        bi[leave] = ei
        bj[leave] = ej
        bf[leave] = theta

    flow = _solve_tree_flows(bi, bj, a, b)
    return bi, bj, flow, pivots


# ---------------------------------------------------------------------------
# isotonic regression (weighted, L^p loss)


def _pool_value_p(z, w, lo, hi, p, tol):
    """Minimizer of sum w_i |v - z_i|^p over v, by bisection on the derivative."""
    for _ in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        d = mid - z
        g = np.dot(w, np.sign(d) * np.abs(d) ** (p - 1.0))  # F'(mid)/p
        if g < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def isotonic_fit(z, w, p, tol=1e-12):
    """Weighted isotonic regression of z under sum w|y - z|^p, y nondecreasing.

    Pool-adjacent-violators; p == 2 pools by weighted mean, general p > 1 by
    bisection on the pooled derivative.
    """
    z = np.asarray(z, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    n = z.size
    start = np.empty(n, dtype=np.int64)
    wsum = np.empty(n, dtype=np.float64)
    wzsum = np.empty(n, dtype=np.float64)
    zmin = np.empty(n, dtype=np.float64)
    zmax = np.empty(n, dtype=np.float64)
    val = np.empty(n, dtype=np.float64)
    nb = 0
    for k in range(n):
        start[nb] = k
        wsum[nb] = w[k]
        wzsum[nb] = w[k] * z[k]
        zmin[nb] = z[k]
        zmax[nb] = z[k]
        val[nb] = z[k]
        nb += 1
        while nb >= 2 and val[nb - 1] < val[nb - 2]:
            wsum[nb - 2] += wsum[nb - 1]
            wzsum[nb - 2] += wzsum[nb - 1]
            zmin[nb - 2] = min(zmin[nb - 2], zmin[nb - 1])
            zmax[nb - 2] = max(zmax[nb - 2], zmax[nb - 1])
            nb -= 1
            s, e = start[nb - 1], k + 1
            if p == 2.0:
                val[nb - 1] = wzsum[nb - 1] / wsum[nb - 1]
            else:
                val[nb - 1] = _pool_value_p(
                    z[s:e], w[s:e], zmin[nb - 1], zmax[nb - 1], p, tol
                )
    y = np.empty(n, dtype=np.float64)
    for blk in range(nb):
        s = start[blk]
        e = start[blk + 1] if blk + 1 < nb else n
        y[s:e] = val[blk]
    return y


# ---------------------------------------------------------------------------
# brute-force oracle: projected subgradient descent


def _iso_l2_inplace(v, w=None):
    """Least-squares isotonic regression, optionally diag(w)-weighted, in place."""
    n = v.size
    val = np.empty(n, dtype=np.float64)
    wsum = np.empty(n, dtype=np.float64)
    cnt = np.empty(n, dtype=np.int64)
    nb = 0
    for k in range(n):
        val[nb] = v[k]
        wsum[nb] = 1.0 if w is None else w[k]
        cnt[nb] = 1
        nb += 1
        while nb >= 2 and val[nb - 1] < val[nb - 2]:
            tot = wsum[nb - 2] + wsum[nb - 1]
            val[nb - 2] = (val[nb - 2] * wsum[nb - 2]
                           + val[nb - 1] * wsum[nb - 1]) / tot
            wsum[nb - 2] = tot
            cnt[nb - 2] += cnt[nb - 1]
            nb -= 1
    pos = 0
    for blk in range(nb):
        v[pos : pos + cnt[blk]] = val[blk]
        pos += cnt[blk]


def descent_oracle(q, p, lam, iters=1_000_000):
    """Constrained L^p fit by projected subgradient descent.

    Minimizes sum |x_i - q_i|^p / n subject to x_{i+1} - x_i >= 1/(lam*n),
    starting from the feasible x_i = i/(lam*n).  Sheared to the monotone
    cone; adaptive (per-coordinate, AdaGrad-style) subgradient steps with
    stagewise halving lengths, restarting the accumulator each stage.  The
    per-coordinate scaling keeps coordinates with vanishing curvature
    (residual ~ 0 at p > 2) moving at full step length where a scalar step
    would starve them.  The best iterate is returned.
    """
    q = np.asarray(q, dtype=np.float64)
    n = q.size
    shift = np.arange(n, dtype=np.float64) / (lam * n)
    z = q - shift
    y = np.zeros(n, dtype=np.float64)
    best = y.copy()

    def objective(yy):
        return float(np.sum(np.abs(yy - z) ** p)) / n

    fbest = objective(y)
    scale = float(z.max() - z.min()) + 1.0 / lam
    nstages = 40
    per = max(1, iters // nstages)
    for s in range(nstages):
        alpha = scale * 2.0 ** (-s)
        h = np.zeros(n)
        for _ in range(per):
            d = y - z
            g = np.sign(d) * np.abs(d) ** (p - 1.0)
            if float(np.dot(g, g)) < 1e-300:
                # y == z: unconstrained optimum is feasible
                return y + shift
            fy = objective(y)
            if fy < fbest:
                fbest = fy
                best[:] = y
            h += g * g
            wm = np.sqrt(np.maximum(h, 1e-600))
            np.maximum(wm, 1e-300, out=wm)
            y -= alpha * g / wm
            _iso_l2_inplace(y, wm)
    return best + shift
