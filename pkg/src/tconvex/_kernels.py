"""Compiled inner loops."""

import os

import numba as nb
import numpy as np

# the loops below are independent per element, so any threading layer gives
# identical results; skip TBB, whose version check warns on older installs
if "NUMBA_THREADING_LAYER" not in os.environ:
    nb.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


@nb.njit(cache=True)
def _segment_sup(x, i, j, cand):
    """sup over the segment [x_i, x_j] of the distance to the points ``cand``.

    Along the segment y(s) = a + s (b - a), the squared distance to a candidate
    z is |b - a|^2 ((s - s_z)^2 + q_z).  Dropping the common s^2 term leaves a
    family of lines, and the sup of the lower envelope over [0, 1] sits at one
    of the envelope's breakpoints.  ``cand`` must contain i and j.
    """
    dim = x.shape[1]
    m = cand.shape[0]
    L2 = 0.0
    for k in range(dim):
        v = x[j, k] - x[i, k]
        L2 += v * v
    if L2 == 0.0:
        return 0.0
    s = np.empty(m)
    c = np.empty(m)
    for p in range(m):
        z = cand[p]
        dot = 0.0
        sq = 0.0
        for k in range(dim):
            w = x[z, k] - x[i, k]
            dot += w * (x[j, k] - x[i, k])
            sq += w * w
        sz = dot / L2
        q = sq / L2 - sz * sz
        if q < 0.0:
            q = 0.0
        s[p] = sz
        c[p] = sz * sz + q
    order = np.argsort(s)
    # lower envelope of lines  g_p(u) = -2 s_p u + c_p, slopes decreasing
    hs = np.empty(m)
    hc = np.empty(m)
    top = 0
    for t in range(m):
        p = order[t]
        sp = s[p]
        cp = c[p]
        if top > 0 and sp == hs[top - 1]:
            if cp >= hc[top - 1]:
                continue
            top -= 1
        while top >= 2:
            # breakpoint of (top-2, top-1) versus breakpoint of (top-2, p)
            s0 = hs[top - 2]
            c0 = hc[top - 2]
            u1 = (hc[top - 1] - c0) / (2.0 * (hs[top - 1] - s0))
            u2 = (cp - c0) / (2.0 * (sp - s0))
            if u2 <= u1:
                top -= 1
            else:
                break
        hs[top] = sp
        hc[top] = cp
        top += 1
    best = 0.0
    for t in range(top - 1):
        u = (hc[t + 1] - hc[t]) / (2.0 * (hs[t + 1] - hs[t]))
        if u <= 0.0 or u >= 1.0:
            continue
        val = u * u - 2.0 * hs[t] * u + hc[t]
        if val > best:
            best = val
    return np.sqrt(best * L2)


@nb.njit(cache=True, parallel=True)
def edge_defects(x, ei, ej, half, ptr, nbr):
    """Per-edge sup of d(., X) over each segment.

    Candidates for edge (i, j) are the points of ``nbr[ptr[i]:ptr[i+1]]``
    within twice the half-length of the midpoint; the CSR lists must hold every
    point within 3 * half[e] of x[i].
    """
    n_edges = ei.shape[0]
    dim = x.shape[1]
    out = np.empty(n_edges)
    for e in nb.prange(n_edges):
        mid = np.empty(dim)
        i = ei[e]
        j = ej[e]
        r = half[e]
        if r == 0.0:
            out[e] = 0.0
            continue
        for k in range(dim):
            mid[k] = 0.5 * (x[i, k] + x[j, k])
        lim = 4.0 * r * r * (1.0 + 1e-12)
        lo = ptr[i]
        hi = ptr[i + 1]
        buf = np.empty(hi - lo + 2, dtype=np.int64)
        cnt = 0
        buf[cnt] = i
        cnt += 1
        buf[cnt] = j
        cnt += 1
        for p in range(lo, hi):
            z = nbr[p]
            if z == i or z == j:
                continue
            d2 = 0.0
            for k in range(dim):
                w = x[z, k] - mid[k]
                d2 += w * w
            if d2 <= lim:
                buf[cnt] = z
                cnt += 1
        out[e] = _segment_sup(x, i, j, buf[:cnt])
    return out


@nb.njit(cache=True)
def _support_radius(x, simp, row, mask, k, dim, center):
    """Circumradius (within the affine hull) of the vertices picked by ``mask``.

    Writes the centre into ``center``; returns -1 when the support is
    affinely degenerate.
    """
    sup = np.empty(k, dtype=np.int64)
    s = 0
    for a in range(k):
        if mask >> a & 1:
            sup[s] = simp[row, a]
            s += 1
    p0 = sup[0]
    if s == 1:
        for c in range(dim):
            center[c] = x[p0, c]
        return 0.0
    m = s - 1
    g = np.empty((m, m + 1))
    scale = 0.0
    for a in range(m):
        for b in range(m):
            acc = 0.0
            for c in range(dim):
                acc += (x[sup[a + 1], c] - x[p0, c]) * (x[sup[b + 1], c] - x[p0, c])
            g[a, b] = acc
        g[a, m] = 0.5 * g[a, a]
        if g[a, a] > scale:
            scale = g[a, a]
    # Gaussian elimination with partial pivoting
    for col in range(m):
        piv = col
        for r in range(col + 1, m):
            if abs(g[r, col]) > abs(g[piv, col]):
                piv = r
        if abs(g[piv, col]) <= 1e-13 * scale:
            return -1.0
        if piv != col:
            for c in range(m + 1):
                tmp = g[col, c]
                g[col, c] = g[piv, c]
                g[piv, c] = tmp
        for r in range(col + 1, m):
            f = g[r, col] / g[col, col]
            for c in range(col, m + 1):
                g[r, c] -= f * g[col, c]
    lam = np.zeros(m)
    for r in range(m - 1, -1, -1):
        acc = g[r, m]
        for c in range(r + 1, m):
            acc -= g[r, c] * lam[c]
        lam[r] = acc / g[r, r]
    for c in range(dim):
        acc = x[p0, c]
        for a in range(m):
            acc += lam[a] * (x[sup[a + 1], c] - x[p0, c])
        center[c] = acc
    rad = 0.0
    for a in range(s):
        d2 = 0.0
        for c in range(dim):
            w = x[sup[a], c] - center[c]
            d2 += w * w
        if d2 > rad:
            rad = d2
    return np.sqrt(rad)


@nb.njit(cache=True, parallel=True)
def simplex_radii(x, simp, tol):
    """Smallest-enclosing-ball radius of every row of ``simp``.

    The smallest enclosing ball is the circumball of some vertex subset, so the
    answer is the least circumradius among subsets whose circumball contains
    every vertex (containment slack ``tol * (1 + radius)``).
    """
    m, k = simp.shape
    dim = x.shape[1]
    out = np.empty(m)
    for row in nb.prange(m):
        center = np.empty(dim)
        best = np.inf
        for mask in range(1, 1 << k):
            r = _support_radius(x, simp, row, mask, k, dim, center)
            if r < 0 or r >= best:
                continue
            ok = True
            for a in range(k):
                d2 = 0.0
                for c in range(dim):
                    w = x[simp[row, a], c] - center[c]
                    d2 += w * w
                if np.sqrt(d2) > r + tol * (1.0 + r):
                    ok = False
                    break
            if ok:
                best = r
        out[row] = best
    return out


@nb.njit(cache=True)
def _adjacent(ptr, nbr, a, b):
    lo = ptr[a]
    hi = ptr[a + 1]
    while lo < hi:
        mid = (lo + hi) // 2
        if nbr[mid] < b:
            lo = mid + 1
        else:
            hi = mid
    return lo < ptr[a + 1] and nbr[lo] == b


@nb.njit(cache=True, parallel=True)
def count_extensions(simp, ptr, nbr):
    """Number of extensions :func:`extend_cliques` produces for each row."""
    m, k = simp.shape
    out = np.zeros(m, dtype=np.int64)
    for row in nb.prange(m):
        first = simp[row, 0]
        last = simp[row, k - 1]
        c = 0
        for p in range(ptr[first], ptr[first + 1]):
            w = nbr[p]
            if w <= last:
                continue
            ok = True
            for a in range(1, k):
                if not _adjacent(ptr, nbr, simp[row, a], w):
                    ok = False
                    break
            if ok:
                c += 1
        out[row] = c
    return out


@nb.njit(cache=True)
def extend_cliques(simp, ptr, nbr):
    """All extensions of each clique row by a larger vertex adjacent to all of it.

    ``ptr, nbr`` is the CSR adjacency with sorted rows.  Output rows are
    sorted and appear in lexicographic order when ``simp`` is.
    """
    m, k = simp.shape
    count = 0
    for row in range(m):
        first = simp[row, 0]
        last = simp[row, k - 1]
        for p in range(ptr[first], ptr[first + 1]):
            w = nbr[p]
            if w <= last:
                continue
            ok = True
            for a in range(1, k):
                if not _adjacent(ptr, nbr, simp[row, a], w):
                    ok = False
                    break
            if ok:
                count += 1
    out = np.empty((count, k + 1), dtype=np.int64)
    q = 0
    for row in range(m):
        first = simp[row, 0]
        last = simp[row, k - 1]
        for p in range(ptr[first], ptr[first + 1]):
            w = nbr[p]
            if w <= last:
                continue
            ok = True
            for a in range(1, k):
                if not _adjacent(ptr, nbr, simp[row, a], w):
                    ok = False
                    break
            if ok:
                for a in range(k):
                    out[q, a] = simp[row, a]
                out[q, k] = w
                q += 1
    return out


@nb.njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for k in range(a.shape[0]):
        acc += a[k] * b[k]
    return acc


@nb.njit(cache=True)
def point_segment_dist(p, a, b):
    ab = b - a
    den = _dot(ab, ab)
    s = 0.0
    if den > 0.0:
        s = min(1.0, max(0.0, _dot(p - a, ab) / den))
    d = p - a - s * ab
    return np.sqrt(_dot(d, d))


@nb.njit(cache=True)
def point_triangle_dist(p, a, b, c):
    """Exact distance from p to triangle abc in any dimension (Voronoi-region
    case analysis, using dot products only)."""
    ab = b - a
    ac = c - a
    ap = p - a
    d1 = _dot(ab, ap)
    d2 = _dot(ac, ap)
    if d1 <= 0.0 and d2 <= 0.0:
        q = a
    else:
        bp = p - b
        d3 = _dot(ab, bp)
        d4 = _dot(ac, bp)
        if d3 >= 0.0 and d4 <= d3:
            q = b
        else:
            vc = d1 * d4 - d3 * d2
            if vc <= 0.0 and d1 >= 0.0 and d3 <= 0.0:
                q = a + (d1 / (d1 - d3)) * ab
            else:
                cp = p - c
                d5 = _dot(ab, cp)
                d6 = _dot(ac, cp)
                if d6 >= 0.0 and d5 <= d6:
                    q = c
                else:
                    vb = d5 * d2 - d1 * d6
                    if vb <= 0.0 and d2 >= 0.0 and d6 <= 0.0:
                        q = a + (d2 / (d2 - d6)) * ac
                    else:
                        va = d3 * d6 - d5 * d4
                        if va <= 0.0 and (d4 - d3) >= 0.0 and (d5 - d6) >= 0.0:
                            q = b + ((d4 - d3) / ((d4 - d3) + (d5 - d6))) * (c - b)
                        else:
                            den = va + vb + vc
                            if den <= 0.0:
                                # degenerate triangle: fall back to its edges
                                return min(point_segment_dist(p, a, b),
                                           min(point_segment_dist(p, b, c),
                                               point_segment_dist(p, a, c)))
                            q = a + (vb / den) * ab + (vc / den) * ac
    d = p - q
    return np.sqrt(_dot(d, d))


@nb.njit(cache=True, parallel=True)
def paired_simplex_dist(q, x, simp, qi, si):
    """Distance from ``q[qi[e]]`` to simplex ``simp[si[e]]`` (edges or triangles)."""
    k = simp.shape[1]
    out = np.empty(qi.shape[0])
    for e in nb.prange(qi.shape[0]):
        row = si[e]
        p = q[qi[e]]
        if k == 2:
            out[e] = point_segment_dist(p, x[simp[row, 0]], x[simp[row, 1]])
        else:
            out[e] = point_triangle_dist(p, x[simp[row, 0]], x[simp[row, 1]], x[simp[row, 2]])
    return out
