"""Bounded-variable revised simplex kernel.

Solves ``min c @ x  s.t.  A @ x == b,  lo <= x <= hi`` where bounds may be
infinite.  Phase 1 adds one artificial column per row; in phase 2 those
columns are fixed at zero, so any left in the basis are pivoted out by
ordinary degenerate steps.  The explicit basis inverse is refactored every
``REFACTOR_EVERY`` pivots.

The kernel is compiled with numba when it is importable and runs as plain
Python otherwise.
"""

import numpy as np

try:  # pragma: no cover - exercised implicitly
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f

OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
FEAS_TOL = 1e-7
REFACTOR_EVERY = 50


@njit(cache=True)
def _refactor(A, basis, b, x, is_basic):
    m = A.shape[0]
    B = np.empty((m, m))
    for i in range(m):
        B[:, i] = A[:, basis[i]]
    Binv = np.ascontiguousarray(np.linalg.inv(B))
    rhs = b.copy()
    for j in range(A.shape[1]):
        if not is_basic[j] and x[j] != 0.0:
            rhs -= A[:, j] * x[j]
    xb = Binv @ np.ascontiguousarray(rhs)
    for i in range(m):
        x[basis[i]] = xb[i]
    return Binv


@njit(cache=True)
def _iterate(A, b, cost, lo, hi, x, basis, is_basic, Binv, max_iter, bland_after, it0):
    m, n = A.shape
    Binv = np.ascontiguousarray(Binv)
    it = it0
    since_refactor = 0
    while True:
        if it >= max_iter:
            return ITERATION_LIMIT, it, Binv
        if since_refactor >= REFACTOR_EVERY:
            Binv = _refactor(A, basis, b, x, is_basic)
            since_refactor = 0

        cb = np.empty(m)
        for i in range(m):
            cb[i] = cost[basis[i]]
        y = cb @ Binv
        d = cost - y @ A

        bland = it >= bland_after
        enter = -1
        direction = 0.0
        best = 0.0
        for j in range(n):
            if is_basic[j] or lo[j] == hi[j]:
                continue
            dj = d[j]
            dirj = 0.0
            if np.isinf(lo[j]) and np.isinf(hi[j]):
                if dj < -COST_TOL:
                    dirj = 1.0
                elif dj > COST_TOL:
                    dirj = -1.0
            elif x[j] <= lo[j]:
                if dj < -COST_TOL:
                    dirj = 1.0
            elif x[j] >= hi[j]:
                if dj > COST_TOL:
                    dirj = -1.0
            else:
                # nonbasic strictly between bounds (only after a free var left)
                if dj < -COST_TOL:
                    dirj = 1.0
                elif dj > COST_TOL:
                    dirj = -1.0
            if dirj == 0.0:
                continue
            if bland:
                enter = j
                direction = dirj
                break
            if abs(dj) > best:
                best = abs(dj)
                enter = j
                direction = dirj
        if enter < 0:
            return OPTIMAL, it, Binv

        alpha = Binv @ np.ascontiguousarray(A[:, enter])
        if direction > 0:
            step = hi[enter] - x[enter]
        else:
            step = x[enter] - lo[enter]
        leave = -1
        leave_to_upper = False
        best_piv = 0.0
        for i in range(m):
            g = direction * alpha[i]
            k = basis[i]
            if g > PIVOT_TOL:
                if np.isinf(lo[k]):
                    continue
                ratio = (x[k] - lo[k]) / g
                to_upper = False
            elif g < -PIVOT_TOL:
                if np.isinf(hi[k]):
                    continue
                ratio = (hi[k] - x[k]) / (-g)
                to_upper = True
            else:
                continue
            if ratio < 0.0:
                ratio = 0.0
            take = False
            if ratio < step - 1e-12:
                take = True
            elif ratio <= step + 1e-12 and leave >= 0:
                if bland:
                    take = k < basis[leave]
                else:
                    take = abs(g) > best_piv
            if take:
                step = ratio
                leave = i
                leave_to_upper = to_upper
                best_piv = abs(g)
        if np.isinf(step):
            return UNBOUNDED, it, Binv

        it += 1
        for i in range(m):
            x[basis[i]] -= step * direction * alpha[i]
        x[enter] += step * direction
        if leave < 0:
            # bound flip: entering variable crosses to its opposite bound
            if direction > 0:
                x[enter] = hi[enter]
            else:
                x[enter] = lo[enter]
            continue

        k = basis[leave]
        x[k] = hi[k] if leave_to_upper else lo[k]
        is_basic[k] = False
        is_basic[enter] = True
        basis[leave] = enter
        p = alpha[leave]
        Binv[leave, :] /= p
        for i in range(m):
            if i != leave and alpha[i] != 0.0:
                Binv[i, :] -= alpha[i] * Binv[leave, :]
        since_refactor += 1


@njit(cache=True)
def solve_standard(A, b, c, lo, hi, max_iter, bland_after):
    """Return ``(status, x, iterations)`` for the bounded standard-form LP."""
    m, n = A.shape
    ntot = n + m
    x = np.zeros(ntot)
    for j in range(n):
        if not np.isinf(lo[j]):
            x[j] = lo[j]
        elif not np.isinf(hi[j]):
            x[j] = hi[j]
    r = b - A @ x[:n]
    Af = np.zeros((m, ntot))
    Af[:, :n] = A
    lof = np.empty(ntot)
    hif = np.empty(ntot)
    lof[:n] = lo
    hif[:n] = hi
    basis = np.empty(m, dtype=np.int64)
    is_basic = np.zeros(ntot, dtype=np.bool_)
    Binv = np.zeros((m, m))
    # crash: a singleton column (e.g. a slack) whose bounds admit the row
    # residual starts basic in place of that row's artificial
    nnz = np.zeros(n, dtype=np.int64)
    for j in range(n):
        for i in range(m):
            if A[i, j] != 0.0:
                nnz[j] += 1
    for i in range(m):
        s = 1.0 if r[i] >= 0.0 else -1.0
        Af[i, n + i] = s
        lof[n + i] = 0.0
        hif[n + i] = np.inf
        placed = False
        for j in range(n):
            if nnz[j] != 1 or is_basic[j] or A[i, j] == 0.0:
                continue
            v = x[j] + r[i] / A[i, j]
            if v >= lo[j] and v <= hi[j]:
                x[j] = v
                basis[i] = j
                is_basic[j] = True
                Binv[i, i] = 1.0 / A[i, j]
                placed = True
                break
        if not placed:
            Binv[i, i] = s
            x[n + i] = abs(r[i])
            basis[i] = n + i
            is_basic[n + i] = True

    cost1 = np.zeros(ntot)
    cost1[n:] = 1.0
    status, it, Binv = _iterate(Af, b, cost1, lof, hif, x, basis, is_basic,
                                Binv, max_iter, bland_after, 0)
    if status == ITERATION_LIMIT:
        return status, x[:n], it
    Binv = _refactor(Af, basis, b, x, is_basic)
    infeas = 0.0
    for i in range(m):
        infeas += abs(x[n + i])
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(b[i]))
    if infeas > FEAS_TOL * scale:
        return INFEASIBLE, x[:n], it

    for i in range(m):
        hif[n + i] = 0.0
        if not is_basic[n + i]:
            x[n + i] = 0.0
    cost2 = np.zeros(ntot)
    cost2[:n] = c
    status, it, Binv = _iterate(Af, b, cost2, lof, hif, x, basis, is_basic,
                                Binv, max_iter, bland_after, it)
    if status == OPTIMAL:
        _refactor(Af, basis, b, x, is_basic)
    return status, x[:n], it
