"""Pure-numpy fallback implementations of the hot kernels.

These mirror the compiled routines in ``_speedups`` exactly (same pivot
rules, same tie-breaking) so the two backends are interchangeable; see
``benchmarks/bench_backends.py`` for the speed comparison.
"""

import numpy as np

COMPILED = False


def dual_eval(u, v, z, rows_out, cols_out):
    """Fused evaluation for the projection dual.

    Forms P = max(0, z + u_i + v_j), writes its row sums into ``rows_out``
    and column sums into ``cols_out``, and returns 0.5 * ||P||_F^2.
    """
    p = z + u[:, None]
    p += v
    np.maximum(p, 0.0, out=p)
    np.sum(p, axis=1, out=rows_out)
    np.sum(p, axis=0, out=cols_out)
    return 0.5 * float(np.vdot(p, p))


def _rebuild_tree(n, m, basic_i, basic_j, cost):
    """BFS over the basic cells: parents, parent-cell index, depth, duals."""
    nn = n + m
    adj_head = np.full(nn, -1, dtype=np.int64)
    adj_next = np.full(2 * (nn - 1), -1, dtype=np.int64)
    # two directed half-edges per basic cell: slot 2k from row node, 2k+1 from col node
    for k in range(nn - 1):
        ri = basic_i[k]
        cj = n + basic_j[k]
        adj_next[2 * k] = adj_head[ri]
        adj_head[ri] = 2 * k
        adj_next[2 * k + 1] = adj_head[cj]
        adj_head[cj] = 2 * k + 1
    parent = np.full(nn, -2, dtype=np.int64)
    pcell = np.full(nn, -1, dtype=np.int64)
    depth = np.zeros(nn, dtype=np.int64)
    dual = np.zeros(nn, dtype=np.float64)
    parent[0] = -1
    stack = [0]
    while stack:
        node = stack.pop()
        e = adj_head[node]
        while e != -1:
            k = e >> 1
            other = n + basic_j[k] if node < n else basic_i[k]
            if parent[other] == -2:
                parent[other] = node
                pcell[other] = k
                depth[other] = depth[node] + 1
                if other < n:
                    # other is a row node: u_i = c_ij - v_j
                    dual[other] = cost[other, basic_j[k]] - dual[node]
                else:
                    dual[other] = cost[basic_i[k], other - n] - dual[node]
                stack.append(other)
            e = adj_next[e]
    if (parent == -2).any():
        raise RuntimeError("basis lost spanning-tree structure")
    return parent, pcell, depth, dual


def _northwest_corner(a, b):
    n, m = len(a), len(b)
    ra = a.copy()
    rb = b.copy()
    basic_i = np.empty(n + m - 1, dtype=np.int64)
    basic_j = np.empty(n + m - 1, dtype=np.int64)
    basic_f = np.empty(n + m - 1, dtype=np.float64)
    i = j = 0
    for k in range(n + m - 1):
        t = min(ra[i], rb[j])
        basic_i[k] = i
        basic_j[k] = j
        basic_f[k] = t
        ra[i] -= t
        rb[j] -= t
        if ra[i] == 0.0 and i < n - 1:
            i += 1
        else:
            j += 1
    return basic_i, basic_j, basic_f


def network_simplex_core(cost, a, b, max_pivots, bland_after=1000):
    """Dense transportation simplex with a spanning-tree basis.

    Entering rule: most negative reduced cost, switching to Bland's rule
    (first negative cell in row-major order) after ``bland_after``
    consecutive degenerate pivots.  Returns (flow matrix, row duals,
    column duals, pivot count).
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    n, m = cost.shape
    opt_tol = 1e-12 * (1.0 + float(np.abs(cost).max()))

    basic_i, basic_j, basic_f = _northwest_corner(a, b)
    parent, pcell, depth, dual = _rebuild_tree(n, m, basic_i, basic_j, cost)

    degenerate_run = 0
    pivots = 0
    while True:
        red = cost - dual[:n, None] - dual[None, n:]
        if degenerate_run >= bland_after:
            neg = np.flatnonzero(red.ravel() < -opt_tol)
            if neg.size == 0:
                break
            flat = int(neg[0])
        else:
            flat = int(red.argmin())
            if red.ravel()[flat] >= -opt_tol:
                break
        ei, ej = divmod(flat, m)

        if pivots >= max_pivots:
            raise RuntimeError(
                f"transportation simplex exceeded {max_pivots} pivots "
                f"(n={n}, m={m}, best reduced cost {red.ravel()[flat]:.3e})"
            )
        pivots += 1

        # Unique tree cycle between row node ei and column node n+ej.
        # Cells walked up from either endpoint alternate -,+,-,... and the
        # entering cell carries +theta.
        cells = []
        signs = []
        x, y = ei, n + ej
        sx = sy = -1
        while depth[x] > depth[y]:
            cells.append(pcell[x])
            signs.append(sx)
            sx = -sx
            x = parent[x]
        while depth[y] > depth[x]:
            cells.append(pcell[y])
            signs.append(sy)
            sy = -sy
            y = parent[y]
        while x != y:
            cells.append(pcell[x])
            signs.append(sx)
            sx = -sx
            x = parent[x]
            cells.append(pcell[y])
            signs.append(sy)
            sy = -sy
            y = parent[y]

        theta = np.inf
        leave = -1
        for c, s in zip(cells, signs):
            if s < 0 and basic_f[c] < theta:
                theta = basic_f[c]
                leave = c
        for c, s in zip(cells, signs):
            basic_f[c] += s * theta
            if basic_f[c] < 0.0:
                basic_f[c] = 0.0

        basic_i[leave] = ei
        basic_j[leave] = ej
        basic_f[leave] = theta
        parent, pcell, depth, dual = _rebuild_tree(n, m, basic_i, basic_j, cost)

        if theta == 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0

    flow = np.zeros((n, m), dtype=np.float64)
    flow[basic_i, basic_j] = basic_f
    return flow, dual[:n].copy(), dual[n:].copy(), pivots


def assignment_min_core(cost):
    """Minimum-cost square assignment via shortest augmenting paths.

    O(n^3) with dual potentials.  Ties are broken toward the smallest
    column index, so a constant matrix yields the identity assignment.
    Returns sigma with sigma[i] = assigned column of row i.
    """
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    n, m = cost.shape
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)  # p[j] = row matched to column j (1-based)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = cost[i0 - 1, :] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            j1 = int(np.where(free, minv[1:], inf).argmin()) + 1
            delta = minv[j1]
            u[p[used]] += delta
            v[used] -= delta
            minv[1:][free] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
    sigma = np.empty(n, dtype=np.int64)
    for j in range(1, m + 1):
        if p[j] > 0:
            sigma[p[j] - 1] = j - 1
    return sigma
