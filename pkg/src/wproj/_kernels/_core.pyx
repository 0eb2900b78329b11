# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: transportation network simplex, isotonic regression,
and the projected-subgradient oracle.

Same algorithms and pivot rules as wproj._kernels._core_py; see that module
for the commented reference implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, pow, sqrt

BACKEND = "compiled"


cdef inline double _dsign(double x) noexcept nogil:
    if x > 0.0:
        return 1.0
    elif x < 0.0:
        return -1.0
    return 0.0


cdef inline double _powp(double x, double p) noexcept nogil:
    # |.|^p fast paths for the exponents the lab actually uses; x >= 0
    if p == 2.0:
        return x * x
    if p == 1.0:
        return x
    if p == 0.5:
        return sqrt(x)
    if p == 3.0:
        return x * x * x
    if p == 1.5:
        return x * sqrt(x)
    return pow(x, p)


cdef Py_ssize_t _greedy_alloc(const double* C, double* ra, double* rb,
                              Py_ssize_t n, Py_ssize_t m,
                              int* bi, int* bj, double* bf) noexcept nogil:
    # row-greedy minimum-cost allocation; forms a forest (see _core_py)
    cdef Py_ssize_t i, j, k = 0, jmin
    cdef double f, cmin
    for i in range(n):
        while ra[i] > 0.0:
            jmin = -1
            cmin = 0.0
            for j in range(m):
                if rb[j] > 0.0 and (jmin < 0 or C[i * m + j] < cmin):
                    cmin = C[i * m + j]
                    jmin = j
            if jmin < 0:
                break
            f = ra[i] if ra[i] <= rb[jmin] else rb[jmin]
            bi[k] = <int> i
            bj[k] = <int> jmin
            bf[k] = f
            k += 1
            ra[i] -= f
            rb[jmin] -= f
    return k


cdef Py_ssize_t _uf_find(long* root, Py_ssize_t v) noexcept nogil:
    while root[v] != v:
        root[v] = root[root[v]]
        v = root[v]
    return v


# ---------------------------------------------------------------------------
# transportation simplex

cdef void _build_tree(int* bi, int* bj, Py_ssize_t n, Py_ssize_t N,
                      const double* C, Py_ssize_t m,
                      int* adj, long* start, long* cur,
                      int* parent, int* pedge, int* depth, double* pot,
                      int* stack) noexcept nogil:
    cdef Py_ssize_t ne = N - 1
    cdef Py_ssize_t e, v, w, k, top
    for v in range(N + 1):
        start[v] = 0
    for e in range(ne):
        start[bi[e] + 1] += 1
        start[n + bj[e] + 1] += 1
    for v in range(N):
        start[v + 1] += start[v]
    for v in range(N):
        cur[v] = start[v]
    for e in range(ne):
        adj[cur[bi[e]]] = <int> e
        cur[bi[e]] += 1
    for e in range(ne):
        adj[cur[n + bj[e]]] = <int> e
        cur[n + bj[e]] += 1

    for v in range(N):
        parent[v] = -1
        pedge[v] = -1
        depth[v] = 0
    pot[0] = 0.0
    stack[0] = 0
    top = 1
    parent[0] = 0  # mark visited; restored below
    while top > 0:
        top -= 1
        v = stack[top]
        for k in range(start[v], start[v + 1]):
            e = adj[k]
            w = bi[e] if (bj[e] + n) == v else (bj[e] + n)
            if parent[w] == -1:
                parent[w] = <int> v
                pedge[w] = <int> e
                depth[w] = depth[v] + 1
                pot[w] = C[<Py_ssize_t> bi[e] * m + bj[e]] - pot[v]
                stack[top] = <int> w
                top += 1
    parent[0] = -1


cdef long _find_entering(const double* C, const double* pot,
                         Py_ssize_t n, Py_ssize_t m, long next_arc,
                         long block, double tol) noexcept nogil:
    cdef long narcs = <long> (n * m)
    cdef long scanned = 0, f = next_arc, l, arc, bestarc
    cdef Py_ssize_t i, j
    cdef double r, best
    while scanned < narcs:
        l = f + block
        if l > narcs:
            l = narcs
        best = 0.0
        bestarc = -1
        i = <Py_ssize_t> (f / m)
        j = <Py_ssize_t> (f - i * m)
        for arc in range(f, l):
            r = C[arc] - pot[i] - pot[n + j]
            if r < best:
                best = r
                bestarc = arc
            j += 1
            if j == m:
                j = 0
                i += 1
        if bestarc >= 0 and best < -tol:
            return bestarc
        scanned += l - f
        f = l
        if f >= narcs:
            f = 0
    return -1


cdef void _tree_flows(int* bi, int* bj, Py_ssize_t n, Py_ssize_t N,
                      const double* a, const double* b,
                      int* adj, long* start, long* cur, long* deg,
                      double* res, double* flow, char* done,
                      int* leaves) noexcept nogil:
    cdef Py_ssize_t ne = N - 1
    cdef Py_ssize_t e, v, w, k, nl, it
    for v in range(N + 1):
        start[v] = 0
    for v in range(N):
        deg[v] = 0
    for e in range(ne):
        start[bi[e] + 1] += 1
        start[n + bj[e] + 1] += 1
        deg[bi[e]] += 1
        deg[n + bj[e]] += 1
        done[e] = 0
    for v in range(N):
        start[v + 1] += start[v]
    for v in range(N):
        cur[v] = start[v]
    for e in range(ne):
        adj[cur[bi[e]]] = <int> e
        cur[bi[e]] += 1
    for e in range(ne):
        adj[cur[n + bj[e]]] = <int> e
        cur[n + bj[e]] += 1
    for v in range(N):
        res[v] = a[v] if v < n else b[v - n]
    nl = 0
    for v in range(N):
        if deg[v] == 1:
            leaves[nl] = <int> v
            nl += 1
    for it in range(ne):
        nl -= 1
        v = leaves[nl]
        e = -1
        for k in range(start[v], start[v + 1]):
            if not done[adj[k]]:
                e = adj[k]
                break
        w = (n + bj[e]) if v < n else bi[e]
        flow[e] = res[v]
        res[w] -= res[v]
        res[v] = 0.0
        done[e] = 1
        deg[w] -= 1
        if deg[w] == 1:
            leaves[nl] = <int> w
            nl += 1


def solve_transportation(a, b, C, double tol_rel=1e-12, long max_pivots=0,
                         double perturb=1e-13, long block_size=0, init=None):
    """Exact dense transportation problem by primal network simplex.

    Same contract as the pure-Python backend: returns the basic cells
    (bi, bj, flow, pivots) with flows re-solved exactly on the final tree.
    ``init=(bi, bj)`` warm-starts from a previous basis tree (marginals must
    be unchanged; costs may differ).
    """
    cdef cnp.ndarray[double, ndim=1] a_ = np.ascontiguousarray(a, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] b_ = np.ascontiguousarray(b, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] C_ = np.ascontiguousarray(C, dtype=np.float64)
    cdef Py_ssize_t n = C_.shape[0], m = C_.shape[1], N = n + m, ne = n + m - 1
    cdef long narcs = <long> (n * m)

    cdef cnp.ndarray[int, ndim=1] bi = np.empty(ne, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] bj = np.empty(ne, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] bf = np.empty(ne, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] flow = np.zeros(ne, dtype=np.float64)

    cdef cnp.ndarray[int, ndim=1] parent = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] pedge = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] depth = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] pot = np.empty(N, dtype=np.float64)
    cdef cnp.ndarray[int, ndim=1] adj = np.empty(2 * ne, dtype=np.int32)
    cdef cnp.ndarray[long, ndim=1] start = np.empty(N + 1, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] cur = np.empty(N + 1, dtype=np.int64)
    cdef cnp.ndarray[long, ndim=1] deg = np.empty(N, dtype=np.int64)
    cdef cnp.ndarray[int, ndim=1] stack = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] legx = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[int, ndim=1] legy = np.empty(N, dtype=np.int32)
    cdef cnp.ndarray[double, ndim=1] res = np.empty(N, dtype=np.float64)
    cdef cnp.ndarray[char, ndim=1] done = np.empty(ne, dtype=np.int8)

    cdef double* Cp = &C_[0, 0]
    cdef double tol = 0.0, cmax = 0.0, ra, rb, f, theta
    cdef Py_ssize_t i, j, e, k, x, y, nx, ny, arc
    cdef long pivots = 0, next_arc = 0, block, enter, leave

    for arc in range(narcs):
        if fabs(Cp[arc]) > cmax:
            cmax = fabs(Cp[arc])
    tol = tol_rel * (1.0 if cmax < 1.0 else cmax)
    if max_pivots <= 0:
        max_pivots = 200 * N + 20000
    block = block_size if block_size > 0 else 4 * <long> sqrt(<double> narcs)
    if block < 64:
        block = 64

    # perturbed marginals for the pivot phase (degeneracy control)
    cdef cnp.ndarray[double, ndim=1] ap_ = a_.copy()
    cdef cnp.ndarray[double, ndim=1] bp_ = b_.copy()
    cdef double eps
    if perturb > 0.0:
        eps = perturb * min(a_.min(), b_.min())
        ap_ += eps * np.arange(1, n + 1, dtype=np.float64)
        bp_[m - 1] += eps * (n * (n + 1)) / 2.0

    cdef cnp.ndarray[double, ndim=1] ra_ = ap_.copy()
    cdef cnp.ndarray[double, ndim=1] rb_ = bp_.copy()
    cdef cnp.ndarray[long, ndim=1] root = np.arange(N, dtype=np.int64)
    cdef cnp.ndarray[int, ndim=1] wi, wj
    cdef Py_ssize_t nalloc, ri, rj, r0, j0, v
    if init is not None:
        # warm start: re-solve flows for the perturbed marginals on the tree
        wi, wj = init
        for e in range(ne):
            bi[e] = wi[e]
            bj[e] = wj[e]
        _tree_flows(&bi[0], &bj[0], n, N, &ap_[0], &bp_[0], &adj[0], &start[0],
                    &cur[0], &deg[0], &res[0], &bf[0], <char*> &done[0],
                    &stack[0])
        for e in range(ne):
            if bf[e] < 0.0:
                bf[e] = 0.0  # float dust on degenerate cells
    else:
        # greedy initial forest, completed to a spanning tree
        nalloc = _greedy_alloc(Cp, &ra_[0], &rb_[0], n, m, &bi[0], &bj[0], &bf[0])
        for e in range(nalloc):
            ri = _uf_find(&root[0], bi[e])
            rj = _uf_find(&root[0], n + bj[e])
            if ri != rj:
                root[rj] = ri
        j0 = bj[0] if nalloc > 0 else 0
        for v in range(N):
            ri = _uf_find(&root[0], v)
            r0 = _uf_find(&root[0], 0)
            if ri != r0:
                if v < n:
                    bi[nalloc] = <int> v
                    bj[nalloc] = <int> j0
                else:
                    bi[nalloc] = 0
                    bj[nalloc] = <int> (v - n)
                bf[nalloc] = 0.0
                root[ri] = r0
                nalloc += 1
        assert nalloc == ne

    cdef int* bip = &bi[0]
    cdef int* bjp = &bj[0]
    cdef double* bfp = &bf[0]
    cdef int stalled = 0

    with nogil:
        while True:
            _build_tree(bip, bjp, n, N, Cp, m, &adj[0], &start[0], &cur[0],
                        &parent[0], &pedge[0], &depth[0], &pot[0], &stack[0])
            enter = _find_entering(Cp, &pot[0], n, m, next_arc, block, tol)
            if enter < 0:
                break
            next_arc = enter + 1
            pivots += 1
            if pivots > max_pivots:
                stalled = 1
                break
            i = <Py_ssize_t> (enter / m)
            j = <Py_ssize_t> (enter - i * m)
            x = i
            y = n + j
            nx = 0
            ny = 0
            while depth[x] > depth[y]:
                legx[nx] = pedge[x]
                nx += 1
                x = parent[x]
            while depth[y] > depth[x]:
                legy[ny] = pedge[y]
                ny += 1
                y = parent[y]
            while x != y:
                legx[nx] = pedge[x]
                nx += 1
                x = parent[x]
                legy[ny] = pedge[y]
                ny += 1
                y = parent[y]
            theta = -1.0
            leave = -1
            for k in range(0, nx, 2):
                e = legx[k]
                if theta < 0.0 or bfp[e] < theta or (bfp[e] == theta and e < leave):
                    theta = bfp[e]
                    leave = e
            for k in range(0, ny, 2):
                e = legy[k]
                if theta < 0.0 or bfp[e] < theta or (bfp[e] == theta and e < leave):
                    theta = bfp[e]
                    leave = e
            for k in range(nx):
                e = legx[k]
                if k % 2 == 0:
                    bfp[e] -= theta
                else:
                    bfp[e] += theta
            for k in range(ny):
                e = legy[k]
                if k % 2 == 0:
                    bfp[e] -= theta
                else:
                    bfp[e] += theta
            bip[leave] = <int> i
            bjp[leave] = <int> j
            bfp[leave] = theta

        if not stalled:
            _tree_flows(bip, bjp, n, N, &a_[0], &b_[0], &adj[0], &start[0],
                        &cur[0], &deg[0], &res[0], &flow[0], <char*> &done[0],
                        &stack[0])

    if stalled:
        from ..errors import SolverStallError
        raise SolverStallError(
            f"transportation simplex exceeded {max_pivots} pivots"
        )
    return bi, bj, flow, pivots


# ---------------------------------------------------------------------------
# isotonic regression (weighted, L^p loss)

cdef double _pool_value_p(const double* z, const double* w,
                          Py_ssize_t s, Py_ssize_t e,
                          double lo, double hi, double p, double tol) noexcept nogil:
    cdef double mid, g, d
    cdef Py_ssize_t k, it
    for it in range(200):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        g = 0.0  # F'(mid)/p
        for k in range(s, e):
            d = mid - z[k]
            g += w[k] * _dsign(d) * pow(fabs(d), p - 1.0)
        if g < 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def isotonic_fit(z, w, double p, double tol=1e-12):
    """Weighted isotonic regression under sum w|y-z|^p (PAVA)."""
    cdef cnp.ndarray[double, ndim=1] z_ = np.ascontiguousarray(z, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w_ = np.ascontiguousarray(w, dtype=np.float64)
    cdef Py_ssize_t n = z_.shape[0]
    cdef cnp.ndarray[double, ndim=1] y = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1] start = np.empty(n, dtype=np.int64)
    cdef cnp.ndarray[double, ndim=1] wsum = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wzsum = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zmin = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] zmax = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] val = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t nb = 0, k, s, e, blk, pos
    cdef double* zp = &z_[0]
    cdef double* wp = &w_[0]

    with nogil:
        for k in range(n):
            start[nb] = k
            wsum[nb] = wp[k]
            wzsum[nb] = wp[k] * zp[k]
            zmin[nb] = zp[k]
            zmax[nb] = zp[k]
            val[nb] = zp[k]
            nb += 1
            while nb >= 2 and val[nb - 1] < val[nb - 2]:
                wsum[nb - 2] += wsum[nb - 1]
                wzsum[nb - 2] += wzsum[nb - 1]
                if zmin[nb - 1] < zmin[nb - 2]:
                    zmin[nb - 2] = zmin[nb - 1]
                if zmax[nb - 1] > zmax[nb - 2]:
                    zmax[nb - 2] = zmax[nb - 1]
                nb -= 1
                s = start[nb - 1]
                e = k + 1
                if p == 2.0:
                    val[nb - 1] = wzsum[nb - 1] / wsum[nb - 1]
                else:
                    val[nb - 1] = _pool_value_p(zp, wp, s, e,
                                                zmin[nb - 1], zmax[nb - 1], p, tol)
        pos = 0
        for blk in range(nb):
            s = start[blk]
            e = start[blk + 1] if blk + 1 < nb else n
            for k in range(s, e):
                y[k] = val[blk]
    return y


# ---------------------------------------------------------------------------
# projected subgradient oracle

cdef void _iso_l2(double* v, Py_ssize_t n, double* val, long* cnt) noexcept nogil:
    cdef Py_ssize_t nb = 0, k, blk, pos
    cdef long tot
    for k in range(n):
        val[nb] = v[k]
        cnt[nb] = 1
        nb += 1
        while nb >= 2 and val[nb - 1] < val[nb - 2]:
            tot = cnt[nb - 2] + cnt[nb - 1]
            val[nb - 2] = (val[nb - 2] * cnt[nb - 2] + val[nb - 1] * cnt[nb - 1]) / tot
            cnt[nb - 2] = tot
            nb -= 1
    pos = 0
    for blk in range(nb):
        for k in range(cnt[blk]):
            v[pos] = val[blk]
            pos += 1


cdef void _iso_l2_weighted(double* v, const double* w, Py_ssize_t n,
                           double* val, double* wsum, long* cnt) noexcept nogil:
    # weighted least-squares isotonic regression (projection in diag(w))
    cdef Py_ssize_t nb = 0, k, blk, pos
    for k in range(n):
        val[nb] = v[k]
        wsum[nb] = w[k]
        cnt[nb] = 1
        nb += 1
        while nb >= 2 and val[nb - 1] < val[nb - 2]:
            val[nb - 2] = (val[nb - 2] * wsum[nb - 2]
                           + val[nb - 1] * wsum[nb - 1]) \
                / (wsum[nb - 2] + wsum[nb - 1])
            wsum[nb - 2] += wsum[nb - 1]
            cnt[nb - 2] += cnt[nb - 1]
            nb -= 1
    pos = 0
    for blk in range(nb):
        for k in range(cnt[blk]):
            v[pos] = val[blk]
            pos += 1


def descent_oracle(q, double p, double lam, long iters=1000000):
    """Constrained L^p fit by projected subgradient descent (see _core_py)."""
    cdef cnp.ndarray[double, ndim=1] q_ = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t n = q_.shape[0]
    cdef cnp.ndarray[double, ndim=1] shift = np.arange(n, dtype=np.float64) / (lam * n)
    cdef cnp.ndarray[double, ndim=1] z = q_ - shift
    cdef cnp.ndarray[double, ndim=1] y = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] best = np.zeros(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] g = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wval = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1] wcnt = np.empty(n, dtype=np.int64)
    cdef double* zp = &z[0]
    cdef double* yp = &y[0]
    cdef double* bp = &best[0]
    cdef double* gp = &g[0]
    cdef double fbest = 0.0, fy, ng2, d, step, em1
    cdef Py_ssize_t k
    cdef long s, t
    cdef int finished = 0

    cdef cnp.ndarray[double, ndim=1] h = np.zeros(n, dtype=np.float64)
    cdef double* hp = &h[0]
    cdef double scale, zlo, zhi, alpha
    cdef long per, nstages = 40
    em1 = p - 1.0
    zlo = zp[0]
    zhi = zp[0]
    for k in range(n):
        if zp[k] < zlo:
            zlo = zp[k]
        if zp[k] > zhi:
            zhi = zp[k]
        fbest += _powp(fabs(yp[k] - zp[k]), p)
    fbest /= n
    scale = (zhi - zlo) + 1.0 / lam
    per = iters / nstages
    if per < 1:
        per = 1

    # Adaptive (per-coordinate) subgradient steps, stagewise halving
    # lengths, with the monotone projection taken in the same diagonal
    # metric.  Dividing by the root of the accumulated squared gradient
    # keeps coordinates with vanishing curvature (residual ~ 0 at p > 2)
    # moving at full step length where a scalar step would starve them;
    # the matching weighted projection preserves the pooled stationarity
    # condition (the metric weights cancel).  The accumulator restarts
    # each stage.
    cdef cnp.ndarray[double, ndim=1] wmet = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] wsum = np.empty(n, dtype=np.float64)
    cdef double* wm = &wmet[0]
    with nogil:
        for s in range(nstages):
            if finished:
                break
            alpha = scale * pow(2.0, <double> (-s))
            for k in range(n):
                hp[k] = 0.0
            for t in range(per):
                ng2 = 0.0
                fy = 0.0
                for k in range(n):
                    d = yp[k] - zp[k]
                    gp[k] = _dsign(d) * _powp(fabs(d), em1)
                    ng2 += gp[k] * gp[k]
                    fy += _powp(fabs(d), p)
                fy /= n
                if fy < fbest:
                    fbest = fy
                    for k in range(n):
                        bp[k] = yp[k]
                if ng2 < 1e-300:
                    finished = 1
                    break
                for k in range(n):
                    hp[k] += gp[k] * gp[k]
                    wm[k] = sqrt(hp[k])
                    if wm[k] < 1e-300:
                        wm[k] = 1e-300
                    yp[k] -= alpha * gp[k] / wm[k]
                _iso_l2_weighted(yp, wm, n, &wval[0], &wsum[0], &wcnt[0])
    if finished:
        return y + shift
    return best + shift
