import math

import numpy as np
import pytest
from generators import infeasible_lp, random_feasible_lp, random_milp, residuals_ok, unbounded_lp

from flexgrid.milp import (
    CapExceeded,
    MilpProblem,
    ProblemBuilder,
    Relation,
    Sense,
    Status,
    TooManyBinaries,
    VarKind,
    enumerate_oracle,
    solve_lp,
    solve_milp,
)


def test_lp_single_bound_active():
    b = ProblemBuilder(Sense.MAXIMIZE)
    x = b.add_var("x", obj=1.0)
    b.add_constraint({x: 1.0}, Relation.LE, 5.0)
    sol = solve_lp(b.build())
    assert sol.status is Status.OPTIMAL
    assert sol.values[x] == pytest.approx(5.0)
    assert sol.objective_value == pytest.approx(5.0)


def test_lp_contradictory_rows_infeasible():
    b = ProblemBuilder(Sense.MAXIMIZE)
    x = b.add_var("x", lo=-math.inf, obj=1.0)
    b.add_constraint({x: 1.0}, Relation.GE, 1.0)
    b.add_constraint({x: 1.0}, Relation.LE, 0.0)
    assert solve_lp(b.build()).status is Status.INFEASIBLE


def test_lp_two_dimensional_vertex():
    # vertices of {x+y<=4, x<=2, x,y>=0}: (0,0) (2,0) (2,2) (0,4); 3x+2y peaks at (2,2)
    b = ProblemBuilder(Sense.MAXIMIZE)
    x = b.add_var("x", obj=3.0)
    y = b.add_var("y", obj=2.0)
    b.add_constraint({x: 1.0, y: 1.0}, Relation.LE, 4.0)
    b.add_constraint({x: 1.0}, Relation.LE, 2.0)
    sol = solve_lp(b.build())
    assert sol.objective_value == pytest.approx(10.0)
    np.testing.assert_allclose(sol.values, [2.0, 2.0], atol=1e-9)


def test_lp_free_variable_and_equality():
    b = ProblemBuilder(Sense.MINIMIZE)
    x = b.add_var("x", lo=-math.inf, obj=1.0)
    y = b.add_var("y", lo=-math.inf, obj=-1.0)
    b.add_constraint({x: 1.0, y: 1.0}, Relation.EQ, 2.0)
    b.add_constraint({y: 1.0}, Relation.LE, 5.0)
    sol = solve_lp(b.build())
    assert sol.objective_value == pytest.approx(-8.0)


def test_lp_without_constraints_uses_bounds():
    b = ProblemBuilder(Sense.MAXIMIZE)
    b.add_var("x", hi=3.0, obj=2.0)
    b.add_var("y", lo=-1.0, hi=1.0, obj=-1.0)
    sol = solve_lp(b.build())
    assert sol.objective_value == pytest.approx(7.0)


def test_knapsack_example_matches_oracle():
    # max 5a+4b+3c, 2a+3b+c<=5: enumeration gives 9 at (1,1,0)
    b = ProblemBuilder(Sense.MAXIMIZE)
    a_, b_, c_ = (b.add_binary(n, o) for n, o in (("a", 5), ("b", 4), ("c", 3)))
    b.add_constraint({a_: 2, b_: 3, c_: 1}, Relation.LE, 5)
    p = b.build()
    sol, oracle = solve_milp(p), enumerate_oracle(p)
    assert sol.objective_value == pytest.approx(9.0)
    assert oracle.objective_value == pytest.approx(9.0)
    assert sum(sol.values) >= 2


def test_all_binaries_fixed_is_plain_lp():
    b = ProblemBuilder(Sense.MAXIMIZE)
    z = b.add_binary("z", obj=1.0)
    x = b.add_var("x", hi=4.0, obj=2.0)
    b.add_constraint({x: 1.0, z: 1.0}, Relation.LE, 3.5)
    p = b.build().with_bounds({z: (1.0, 1.0)})
    sol = solve_milp(p)
    assert sol.node_count == 1
    assert sol.objective_value == pytest.approx(1.0 + 2 * 2.5)


def test_totally_unimodular_relaxation_is_integral():
    # assignment problem: the LP optimum is already integral
    rng = np.random.default_rng(7)
    cost = rng.integers(1, 20, (4, 4))
    b = ProblemBuilder(Sense.MINIMIZE)
    v = [[b.add_binary(f"a{i}{j}", float(cost[i, j])) for j in range(4)] for i in range(4)]
    for i in range(4):
        b.add_constraint({v[i][j]: 1.0 for j in range(4)}, Relation.EQ, 1.0)
        b.add_constraint({v[j][i]: 1.0 for j in range(4)}, Relation.EQ, 1.0)
    p = b.build()
    assert solve_milp(p).objective_value == pytest.approx(solve_lp(p).objective_value)


def test_oracle_zero_binaries_equals_lp():
    b = ProblemBuilder(Sense.MAXIMIZE)
    x = b.add_var("x", hi=2.0, obj=1.0)
    y = b.add_var("y", hi=2.0, obj=1.0)
    b.add_constraint({x: 1.0, y: 2.0}, Relation.LE, 3.0)
    p = b.build()
    assert enumerate_oracle(p).objective_value == pytest.approx(solve_lp(p).objective_value)


def test_oracle_single_binary_picks_one():
    b = ProblemBuilder(Sense.MAXIMIZE)
    b.add_binary("z", obj=1.0)
    sol = enumerate_oracle(b.build())
    assert sol.values[0] == 1.0


def test_oracle_tie_break_lowest_assignment():
    b = ProblemBuilder(Sense.MAXIMIZE)
    z0 = b.add_binary("z0", obj=1.0)
    z1 = b.add_binary("z1", obj=1.0)
    b.add_constraint({z0: 1.0, z1: 1.0}, Relation.LE, 1.0)
    sol = enumerate_oracle(b.build())
    assert list(sol.values) == [0.0, 1.0]


def test_oracle_rejects_too_many_binaries():
    b = ProblemBuilder()
    for i in range(21):
        b.add_binary(f"z{i}")
    with pytest.raises(TooManyBinaries):
        enumerate_oracle(b.build())


def test_node_cap_raises_with_incumbent():
    rng = np.random.default_rng(3)
    b = ProblemBuilder(Sense.MAXIMIZE)
    w = rng.uniform(1, 10, 18)
    z = [b.add_binary(f"z{i}", float(w[i] + rng.uniform(0, 1))) for i in range(18)]
    b.add_constraint({z[i]: float(w[i]) for i in range(18)}, Relation.LE, float(w.sum() / 2))
    with pytest.raises(CapExceeded) as info:
        solve_milp(b.build(), node_cap=3)
    assert info.value.incumbent is None or info.value.incumbent.status is Status.OPTIMAL


def test_problem_validation():
    with pytest.raises(ValueError):
        MilpProblem(1, (VarKind.BINARY,), ((0.0, 2.0),), (), (1.0,))
    with pytest.raises(ValueError):
        MilpProblem(1, (VarKind.CONTINUOUS,), ((0.0, 1.0),), (), (math.nan,))


def test_lp_format_dump():
    b = ProblemBuilder(Sense.MAXIMIZE)
    z = b.add_binary("res[0,pv]", obj=2.0)
    x = b.add_var("x", hi=3.0, obj=-1.0)
    b.add_constraint({z: 1.0, x: 1.0}, Relation.LE, 2.5)
    text = b.build().to_lp_format()
    assert text.startswith("Maximize\n obj: 2 res_0_pv_ - 1 x\n")
    assert " c0: 1 res_0_pv_ + 1 x <= 2.5" in text
    assert "Binary\n res_0_pv_\nEnd\n" in text


@pytest.mark.parametrize("seed", range(60))
def test_milp_matches_oracle(seed):
    p = random_milp(np.random.default_rng(seed))
    sol, oracle = solve_milp(p), enumerate_oracle(p)
    assert sol.status is oracle.status
    if sol.status is Status.OPTIMAL:
        assert sol.objective_value == pytest.approx(oracle.objective_value, abs=1e-6)
        assert residuals_ok(p, sol.values)
        binaries = sol.values[p.binaries]
        assert np.all(np.abs(binaries - np.round(binaries)) <= 1e-6)
        relax = solve_lp(p).objective_value
        if p.sense is Sense.MAXIMIZE:
            assert sol.objective_value <= relax + 1e-6
        else:
            assert sol.objective_value >= relax - 1e-6


@pytest.mark.parametrize("seed", range(40))
def test_random_lp_residuals(seed):
    p = random_feasible_lp(np.random.default_rng(1000 + seed))
    sol = solve_lp(p)
    assert sol.status is Status.OPTIMAL
    assert residuals_ok(p, sol.values)
    assert sol.objective_value == pytest.approx(float(np.dot(p.objective, sol.values)), abs=1e-7)


@pytest.mark.parametrize("seed", range(15))
def test_random_lp_against_scipy(seed):
    optimize = pytest.importorskip("scipy.optimize")
    p = random_feasible_lp(np.random.default_rng(2000 + seed))
    A, rhs, rel = p.dense()
    sgn = -1.0 if p.sense is Sense.MAXIMIZE else 1.0
    le = [i for i, r in enumerate(rel) if r is Relation.LE]
    ge = [i for i, r in enumerate(rel) if r is Relation.GE]
    eq = [i for i, r in enumerate(rel) if r is Relation.EQ]
    A_ub = np.vstack([A[le], -A[ge]])
    b_ub = np.concatenate([rhs[le], -rhs[ge]])
    ref = optimize.linprog(sgn * np.array(p.objective), A_ub=A_ub if len(A_ub) else None,
                           b_ub=b_ub if len(b_ub) else None,
                           A_eq=A[eq] if eq else None, b_eq=rhs[eq] if eq else None,
                           bounds=list(p.bounds), method="highs")
    assert ref.status == 0
    assert solve_lp(p).objective_value == pytest.approx(sgn * ref.fun, abs=1e-6)


@pytest.mark.parametrize("seed", range(10))
def test_infeasible_and_unbounded_families(seed):
    rng = np.random.default_rng(3000 + seed)
    assert solve_lp(infeasible_lp(rng)).status is Status.INFEASIBLE
    assert solve_lp(unbounded_lp(rng)).status is Status.UNBOUNDED


def test_deterministic_node_counts():
    p = random_milp(np.random.default_rng(11), max_bin=12)
    a, b = solve_milp(p), solve_milp(p)
    assert a.node_count == b.node_count
    assert np.array_equal(a.values, b.values)
