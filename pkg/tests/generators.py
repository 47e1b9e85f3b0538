"""Seeded random problem families shared by the solver tests."""

import math

import numpy as np

from flexgrid.milp import ProblemBuilder, Relation, Sense

RELATIONS = (Relation.LE, Relation.GE, Relation.EQ)


def random_milp(rng, max_bin=12, max_cont=10, max_cons=15, unbounded_share=0.1):
    """Small MILP; most instances get a right-hand side built around a random
    point so they are feasible, the rest are left to chance."""
    nb = int(rng.integers(1, max_bin + 1))
    nc = int(rng.integers(0, max_cont + 1))
    m = int(rng.integers(1, max_cons + 1))
    b = ProblemBuilder(Sense.MAXIMIZE if rng.random() < 0.5 else Sense.MINIMIZE)
    open_ended = nc > 0 and rng.random() < unbounded_share
    idx, point = [], []
    for i in range(nb):
        idx.append(b.add_binary(f"z{i}", float(rng.integers(-10, 11))))
        point.append(float(rng.integers(0, 2)))
    for i in range(nc):
        hi = math.inf if open_ended and i == 0 else float(rng.integers(1, 10))
        idx.append(b.add_var(f"x{i}", lo=0.0, hi=hi, obj=float(rng.integers(-10, 11))))
        point.append(float(rng.uniform(0, 5 if math.isinf(hi) else hi)))
    anchored = rng.random() < 0.8
    for _ in range(m):
        k = int(rng.integers(1, len(idx) + 1))
        cols = rng.choice(len(idx), k, replace=False)
        coefs = {int(idx[j]): float(rng.integers(-9, 10)) for j in cols}
        rel = RELATIONS[int(rng.choice(3, p=[0.6, 0.3, 0.1]))]
        if anchored:
            lhs = sum(a * point[j] for j, a in coefs.items())
            slack = float(rng.integers(0, 6))
            rhs = {Relation.LE: lhs + slack, Relation.GE: lhs - slack, Relation.EQ: lhs}[rel]
        else:
            rhs = float(rng.integers(-5, 15))
        b.add_constraint(coefs, rel, rhs)
    return b.build()


def random_feasible_lp(rng):
    """Bounded LP with a known interior point; all variables continuous."""
    n = int(rng.integers(2, 16))
    m = int(rng.integers(1, 16))
    b = ProblemBuilder(Sense.MAXIMIZE if rng.random() < 0.5 else Sense.MINIMIZE)
    his = rng.uniform(1, 10, n)
    xs = [b.add_var(f"x{j}", lo=0.0, hi=float(his[j]), obj=float(rng.normal()))
          for j in range(n)]
    point = rng.uniform(0, 1, n) * his
    for _ in range(m):
        a = rng.normal(size=n) * (rng.random(n) < 0.6)
        lhs = float(a @ point)
        rel = RELATIONS[int(rng.choice(3, p=[0.5, 0.3, 0.2]))]
        rhs = {Relation.LE: lhs + rng.uniform(0, 2), Relation.GE: lhs - rng.uniform(0, 2),
               Relation.EQ: lhs}[rel]
        b.add_constraint({xs[j]: float(a[j]) for j in range(n)}, rel, rhs)
    return b.build()


def infeasible_lp(rng):
    """sum(x) <= c and sum(x) >= c + gap with nonnegative x."""
    n = int(rng.integers(1, 8))
    b = ProblemBuilder(Sense.MAXIMIZE)
    xs = [b.add_var(f"x{j}", obj=float(rng.normal())) for j in range(n)]
    c = float(rng.uniform(0, 10))
    b.add_constraint({x: 1.0 for x in xs}, Relation.LE, c)
    b.add_constraint({x: 1.0 for x in xs}, Relation.GE, c + float(rng.uniform(0.5, 5)))
    return b.build()


def unbounded_lp(rng):
    """A free ray: maximize a positive-cost variable that only appears with
    nonpositive coefficients in <= rows."""
    n = int(rng.integers(2, 8))
    b = ProblemBuilder(Sense.MAXIMIZE)
    xs = [b.add_var(f"x{j}", hi=float(rng.uniform(1, 5)), obj=float(rng.normal()))
          for j in range(n - 1)]
    ray = b.add_var("ray", obj=float(rng.uniform(0.1, 3)))
    for _ in range(int(rng.integers(1, 6))):
        coefs = {x: float(rng.normal()) for x in xs}
        coefs[ray] = -float(rng.uniform(0, 2))
        b.add_constraint(coefs, Relation.LE, float(rng.uniform(1, 10)))
    return b.build()


def residuals_ok(problem, x, tol=1e-7):
    A, rhs, rel = problem.dense()
    lhs = A @ x
    for v, r, c in zip(lhs, rhs, rel):
        scale = 1.0 + abs(r)
        if c is Relation.LE and v - r > tol * scale:
            return False
        if c is Relation.GE and r - v > tol * scale:
            return False
        if c is Relation.EQ and abs(v - r) > tol * scale:
            return False
    lo = np.array([bd[0] for bd in problem.bounds])
    hi = np.array([bd[1] for bd in problem.bounds])
    return bool(np.all(x >= lo - tol) and np.all(x <= hi + tol))
