# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: fused dual evaluation for the polytope projection,
the transportation network simplex, and minimum-cost assignment.

Semantics (pivot rules, tie-breaking) mirror ``_kernels_py`` exactly.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()

COMPILED = True


def dual_eval(double[::1] u, double[::1] v, double[:, ::1] z,
              double[::1] rows_out, double[::1] cols_out):
    """Fused max(0, z + u_i + v_j) pass: row/col sums and 0.5 ||P||_F^2."""
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t m = z.shape[1]
    cdef Py_ssize_t i, j
    cdef double acc = 0.0
    cdef double p, ui, rsum
    for j in range(m):
        cols_out[j] = 0.0
    for i in range(n):
        ui = u[i]
        rsum = 0.0
        for j in range(m):
            p = z[i, j] + ui + v[j]
            if p > 0.0:
                rsum += p
                cols_out[j] += p
                acc += p * p
        rows_out[i] = rsum
    return 0.5 * acc


cdef int _rebuild_tree(Py_ssize_t n, Py_ssize_t m,
                       long long[::1] basic_i, long long[::1] basic_j,
                       double[:, ::1] cost,
                       long long[::1] parent, long long[::1] pcell,
                       long long[::1] depth, double[::1] dual,
                       long long[::1] adj_head, long long[::1] adj_next,
                       long long[::1] stack) except -1:
    cdef Py_ssize_t nn = n + m
    cdef Py_ssize_t k, node, other, top
    cdef long long e
    for node in range(nn):
        adj_head[node] = -1
        parent[node] = -2
    for k in range(nn - 1):
        adj_next[2 * k] = adj_head[basic_i[k]]
        adj_head[basic_i[k]] = 2 * k
        adj_next[2 * k + 1] = adj_head[n + basic_j[k]]
        adj_head[n + basic_j[k]] = 2 * k + 1
    parent[0] = -1
    pcell[0] = -1
    depth[0] = 0
    dual[0] = 0.0
    stack[0] = 0
    top = 1
    cdef Py_ssize_t visited = 0
    while top > 0:
        top -= 1
        node = stack[top]
        visited += 1
        e = adj_head[node]
        while e != -1:
            k = e >> 1
            if node < n:
                other = n + basic_j[k]
            else:
                other = basic_i[k]
            if parent[other] == -2:
                parent[other] = node
                pcell[other] = k
                depth[other] = depth[node] + 1
                if other < n:
                    dual[other] = cost[other, basic_j[k]] - dual[node]
                else:
                    dual[other] = cost[basic_i[k], other - n] - dual[node]
                stack[top] = other
                top += 1
            e = adj_next[e]
    if visited != nn:
        raise RuntimeError("basis lost spanning-tree structure")
    return 0


def network_simplex_core(cost, a, b, long long max_pivots, long long bland_after=1000):
    """Dense transportation simplex; see the fallback for the contract."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    cdef double[:, ::1] c = cost
    cdef double[::1] av = a
    cdef double[::1] bv = b
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t m = c.shape[1]
    cdef Py_ssize_t nn = n + m
    cdef double opt_tol = 1e-12 * (1.0 + float(np.abs(cost).max()))

    basic_i_arr = np.empty(nn - 1, dtype=np.int64)
    basic_j_arr = np.empty(nn - 1, dtype=np.int64)
    basic_f_arr = np.empty(nn - 1, dtype=np.float64)
    cdef long long[::1] basic_i = basic_i_arr
    cdef long long[::1] basic_j = basic_j_arr
    cdef double[::1] basic_f = basic_f_arr

    # northwest-corner start
    ra = a.copy()
    rb = b.copy()
    cdef double[::1] rav = ra
    cdef double[::1] rbv = rb
    cdef Py_ssize_t i = 0, j = 0, k
    cdef double t
    for k in range(nn - 1):
        t = rav[i] if rav[i] < rbv[j] else rbv[j]
        basic_i[k] = i
        basic_j[k] = j
        basic_f[k] = t
        rav[i] -= t
        rbv[j] -= t
        if rav[i] == 0.0 and i < n - 1:
            i += 1
        else:
            j += 1

    parent_arr = np.empty(nn, dtype=np.int64)
    pcell_arr = np.empty(nn, dtype=np.int64)
    depth_arr = np.empty(nn, dtype=np.int64)
    dual_arr = np.empty(nn, dtype=np.float64)
    adj_head_arr = np.empty(nn, dtype=np.int64)
    adj_next_arr = np.empty(2 * (nn - 1), dtype=np.int64)
    stack_arr = np.empty(nn, dtype=np.int64)
    cdef long long[::1] parent = parent_arr
    cdef long long[::1] pcell = pcell_arr
    cdef long long[::1] depth = depth_arr
    cdef double[::1] dual = dual_arr
    cdef long long[::1] adj_head = adj_head_arr
    cdef long long[::1] adj_next = adj_next_arr
    cdef long long[::1] stack = stack_arr
    _rebuild_tree(n, m, basic_i, basic_j, c, parent, pcell, depth, dual,
                  adj_head, adj_next, stack)

    cells_arr = np.empty(2 * nn, dtype=np.int64)
    signs_arr = np.empty(2 * nn, dtype=np.int64)
    cdef long long[::1] cells = cells_arr
    cdef long long[::1] signs = signs_arr

    cdef long long degenerate_run = 0
    cdef long long pivots = 0
    cdef Py_ssize_t ei, ej, x, y, ncells, idx, leave
    cdef long long sx, sy
    cdef double best, red, theta, ndual_i
    cdef bint found

    while True:
        found = False
        ei = -1
        ej = -1
        if degenerate_run >= bland_after:
            for i in range(n):
                ndual_i = dual[i]
                for j in range(m):
                    red = c[i, j] - ndual_i - dual[n + j]
                    if red < -opt_tol:
                        ei = i
                        ej = j
                        found = True
                        break
                if found:
                    break
        else:
            best = -opt_tol
            for i in range(n):
                ndual_i = dual[i]
                for j in range(m):
                    red = c[i, j] - ndual_i - dual[n + j]
                    if red < best:
                        best = red
                        ei = i
                        ej = j
            found = ei >= 0
        if not found:
            break

        if pivots >= max_pivots:
            raise RuntimeError(
                f"transportation simplex exceeded {max_pivots} pivots (n={n}, m={m})"
            )
        pivots += 1

        # tree cycle between row node ei and column node n+ej; cells walked
        # up from either endpoint alternate -,+,-,... (entering carries +)
        ncells = 0
        x = ei
        y = n + ej
        sx = -1
        sy = -1
        while depth[x] > depth[y]:
            cells[ncells] = pcell[x]
            signs[ncells] = sx
            ncells += 1
            sx = -sx
            x = parent[x]
        while depth[y] > depth[x]:
            cells[ncells] = pcell[y]
            signs[ncells] = sy
            ncells += 1
            sy = -sy
            y = parent[y]
        while x != y:
            cells[ncells] = pcell[x]
            signs[ncells] = sx
            ncells += 1
            sx = -sx
            x = parent[x]
            cells[ncells] = pcell[y]
            signs[ncells] = sy
            ncells += 1
            sy = -sy
            y = parent[y]

        theta = INFINITY
        leave = -1
        for idx in range(ncells):
            if signs[idx] < 0 and basic_f[cells[idx]] < theta:
                theta = basic_f[cells[idx]]
                leave = cells[idx]
        for idx in range(ncells):
            basic_f[cells[idx]] += signs[idx] * theta
            if basic_f[cells[idx]] < 0.0:
                basic_f[cells[idx]] = 0.0

        basic_i[leave] = ei
        basic_j[leave] = ej
        basic_f[leave] = theta
        _rebuild_tree(n, m, basic_i, basic_j, c, parent, pcell, depth, dual,
                      adj_head, adj_next, stack)

        if theta == 0.0:
            degenerate_run += 1
        else:
            degenerate_run = 0

    flow = np.zeros((n, m), dtype=np.float64)
    cdef double[:, ::1] fv = flow
    for k in range(nn - 1):
        fv[basic_i[k], basic_j[k]] = basic_f[k]
    return flow, dual_arr[:n].copy(), dual_arr[n:].copy(), int(pivots)


def assignment_min_core(cost):
    """Minimum-cost assignment; see the fallback for the contract."""
    cost = np.ascontiguousarray(cost, dtype=np.float64)
    cdef double[:, ::1] c = cost
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t m = c.shape[1]

    u_arr = np.zeros(n + 1)
    v_arr = np.zeros(m + 1)
    p_arr = np.zeros(m + 1, dtype=np.int64)
    way_arr = np.zeros(m + 1, dtype=np.int64)
    minv_arr = np.empty(m + 1)
    used_arr = np.empty(m + 1, dtype=np.uint8)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef long long[::1] p = p_arr
    cdef long long[::1] way = way_arr
    cdef double[::1] minv = minv_arr
    cdef unsigned char[::1] used = used_arr

    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double cur, delta
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(m + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            delta = INFINITY
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1

    sigma = np.empty(n, dtype=np.int64)
    cdef long long[::1] sv = sigma
    for j in range(1, m + 1):
        if p[j] > 0:
            sv[p[j] - 1] = j - 1
    return sigma
