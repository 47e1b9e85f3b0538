"""LP/MILP engine: revised simplex, best-first branch and bound, and an
exhaustive enumeration oracle used to cross-check the branch and bound.

Problems are small and dense (a few hundred variables at most), so every
relaxation is solved from scratch with the kernel in :mod:`flexgrid._simplex`.
"""

from __future__ import annotations

import enum
import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from flexgrid import _simplex

PIVOT_TOL = _simplex.PIVOT_TOL
FEAS_TOL = _simplex.FEAS_TOL
INT_TOL = 1e-6
DEFAULT_NODE_CAP = 100_000
BLAND_AFTER = 1000
ORACLE_MAX_BINARIES = 20


class VarKind(enum.Enum):
    CONTINUOUS = "continuous"
    BINARY = "binary"


class Relation(enum.Enum):
    LE = "<="
    EQ = "="
    GE = ">="


class Sense(enum.Enum):
    MAXIMIZE = "max"
    MINIMIZE = "min"


class Status(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class SolverError(Exception):
    pass


class NumericalBreakdown(SolverError):
    """Simplex hit its iteration cap or produced a singular basis."""


class CapExceeded(SolverError):
    """Branch and bound explored ``node_cap`` nodes without proving optimality.

    The best incumbent found so far (possibly ``None``) is attached.
    """

    def __init__(self, message: str, incumbent: MilpSolution | None):
        super().__init__(message)
        self.incumbent = incumbent


class TooManyBinaries(SolverError):
    pass


@dataclass(frozen=True)
class Constraint:
    coefficients: Mapping[int, float]
    relation: Relation
    rhs: float


@dataclass(frozen=True)
class MilpProblem:
    n_vars: int
    var_kinds: tuple[VarKind, ...]
    bounds: tuple[tuple[float, float], ...]
    constraints: tuple[Constraint, ...]
    objective: tuple[float, ...]
    sense: Sense = Sense.MAXIMIZE
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = self.n_vars
        if n <= 0:
            raise ValueError("n_vars must be positive")
        if len(self.var_kinds) != n or len(self.bounds) != n or len(self.objective) != n:
            raise ValueError("per-variable data must have length n_vars")
        if self.names is not None and len(self.names) != n:
            raise ValueError("names must have length n_vars")
        for j, (kind, (lo, hi)) in enumerate(zip(self.var_kinds, self.bounds)):
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError(f"variable {j}: NaN bound")
            if kind is VarKind.BINARY and (lo < 0 or hi > 1):
                raise ValueError(f"variable {j}: binary bounds must lie in [0, 1]")
        for c in self.objective:
            if not math.isfinite(c):
                raise ValueError("objective coefficients must be finite")
        for k, con in enumerate(self.constraints):
            if not math.isfinite(con.rhs):
                raise ValueError(f"constraint {k}: rhs must be finite")
            for j, a in con.coefficients.items():
                if not 0 <= j < n:
                    raise ValueError(f"constraint {k}: index {j} out of range")
                if not math.isfinite(a):
                    raise ValueError(f"constraint {k}: coefficient must be finite")

    @property
    def binaries(self) -> list[int]:
        return [j for j, k in enumerate(self.var_kinds) if k is VarKind.BINARY]

    def dense(self) -> tuple[np.ndarray, np.ndarray, list[Relation]]:
        A = np.zeros((len(self.constraints), self.n_vars))
        b = np.zeros(len(self.constraints))
        for i, con in enumerate(self.constraints):
            for j, a in con.coefficients.items():
                A[i, j] += a
            b[i] = con.rhs
        return A, b, [c.relation for c in self.constraints]

    def evaluate(self, values: Sequence[float]) -> float:
        return float(np.dot(self.objective, values))

    def max_violation(self, values: Sequence[float]) -> float:
        """Largest scaled violation of any row or bound at ``values``."""
        x = np.asarray(values, dtype=float)
        worst = 0.0
        for con in self.constraints:
            lhs = sum(a * x[j] for j, a in con.coefficients.items())
            scale = 1.0 + abs(con.rhs)
            if con.relation is Relation.LE:
                v = lhs - con.rhs
            elif con.relation is Relation.GE:
                v = con.rhs - lhs
            else:
                v = abs(lhs - con.rhs)
            worst = max(worst, v / scale)
        for j, (lo, hi) in enumerate(self.bounds):
            worst = max(worst, lo - x[j], x[j] - hi)
        return worst

    def with_bounds(self, bounds: Mapping[int, tuple[float, float]]) -> MilpProblem:
        new = list(self.bounds)
        for j, bnd in bounds.items():
            new[j] = bnd
        return MilpProblem(self.n_vars, self.var_kinds, tuple(new), self.constraints,
                           self.objective, self.sense, self.names)

    def to_lp_format(self) -> str:
        """Render in CPLEX LP text format for cross-checking with other solvers."""
        names = self.names or tuple(f"x{j}" for j in range(self.n_vars))
        names = [_lp_name(s) for s in names]

        def expr(coefs):
            terms = []
            for j, a in sorted(coefs.items()):
                if a == 0:
                    continue
                sign = "-" if a < 0 else "+"
                terms.append(f"{sign} {abs(a):.12g} {names[j]}")
            if not terms:
                return "0 " + names[0]
            s = " ".join(terms)
            return s[2:] if s.startswith("+ ") else s

        lines = ["Maximize" if self.sense is Sense.MAXIMIZE else "Minimize"]
        lines.append(" obj: " + expr(dict(enumerate(self.objective))))
        lines.append("Subject To")
        for i, con in enumerate(self.constraints):
            lines.append(f" c{i}: {expr(con.coefficients)} {con.relation.value} {con.rhs:.12g}")
        lines.append("Bounds")
        for j, (lo, hi) in enumerate(self.bounds):
            lo_s = "-inf" if lo == -math.inf else f"{lo:.12g}"
            hi_s = "+inf" if hi == math.inf else f"{hi:.12g}"
            lines.append(f" {lo_s} <= {names[j]} <= {hi_s}")
        bins = [names[j] for j in self.binaries]
        if bins:
            lines.append("Binary")
            lines.append(" " + " ".join(bins))
        lines.append("End")
        return "\n".join(lines) + "\n"


def _lp_name(s: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "_." else "_" for ch in s)


@dataclass
class MilpSolution:
    status: Status
    values: np.ndarray
    objective_value: float
    node_count: int = 0
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


class ProblemBuilder:
    """Incremental construction of a :class:`MilpProblem` with named variables."""

    def __init__(self, sense: Sense = Sense.MAXIMIZE):
        self.sense = sense
        self._names: list[str] = []
        self._kinds: list[VarKind] = []
        self._bounds: list[tuple[float, float]] = []
        self._obj: list[float] = []
        self._cons: list[Constraint] = []
        self.index: dict[str, int] = {}

    def add_var(self, name: str, kind: VarKind = VarKind.CONTINUOUS,
                lo: float = 0.0, hi: float = math.inf, obj: float = 0.0) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name!r}")
        j = len(self._names)
        self.index[name] = j
        self._names.append(name)
        self._kinds.append(kind)
        self._bounds.append((float(lo), float(hi)))
        self._obj.append(float(obj))
        return j

    def add_binary(self, name: str, obj: float = 0.0, fixed_zero: bool = False) -> int:
        return self.add_var(name, VarKind.BINARY, 0.0, 0.0 if fixed_zero else 1.0, obj)

    def add_constraint(self, coefficients: Mapping[int, float], relation: Relation, rhs: float):
        coefs = {j: float(a) for j, a in coefficients.items() if a != 0}
        self._cons.append(Constraint(coefs, relation, float(rhs)))

    def set_objective(self, j: int, coef: float):
        self._obj[j] = float(coef)

    @property
    def n_vars(self) -> int:
        return len(self._names)

    def build(self) -> MilpProblem:
        return MilpProblem(
            n_vars=len(self._names),
            var_kinds=tuple(self._kinds),
            bounds=tuple(self._bounds),
            constraints=tuple(self._cons),
            objective=tuple(self._obj),
            sense=self.sense,
            names=tuple(self._names),
        )


def _iteration_cap(n_vars: int, n_cons: int) -> int:
    return 50 * (n_vars + n_cons)


def _solve_arrays(A, b, rel, c, lo, hi, sense_max: bool, cap: int):
    """Solve an LP given dense arrays.  Returns ``(status, x, iterations)``."""
    m, n = A.shape
    if np.any(lo > hi):
        return Status.INFEASIBLE, np.clip(np.zeros(n), lo, hi), 0
    cmin = -c if sense_max else c
    if m == 0:
        x = np.empty(n)
        for j in range(n):
            if cmin[j] < 0:
                x[j] = hi[j]
            elif cmin[j] > 0:
                x[j] = lo[j]
            else:
                x[j] = lo[j] if np.isfinite(lo[j]) else (hi[j] if np.isfinite(hi[j]) else 0.0)
        if not np.all(np.isfinite(x)):
            return Status.UNBOUNDED, np.nan_to_num(x), 0
        return Status.OPTIMAL, x, 0

    # one slack per inequality row: <= rows get s in [0, inf), >= rows (-inf, 0]
    n_slack = sum(1 for r in rel if r is not Relation.EQ)
    As = np.zeros((m, n + n_slack))
    As[:, :n] = A
    los = np.empty(n + n_slack)
    his = np.empty(n + n_slack)
    los[:n], his[:n] = lo, hi
    k = n
    for i, r in enumerate(rel):
        if r is Relation.EQ:
            continue
        As[i, k] = 1.0
        if r is Relation.LE:
            los[k], his[k] = 0.0, np.inf
        else:
            los[k], his[k] = -np.inf, 0.0
        k += 1
    cs = np.zeros(n + n_slack)
    cs[:n] = cmin
    bland_after = min(BLAND_AFTER, cap // 2)
    try:
        code, xs, its = _simplex.solve_standard(As, b, cs, los, his, cap, bland_after)
    except np.linalg.LinAlgError as exc:
        raise NumericalBreakdown(f"singular basis: {exc}") from exc
    if code == _simplex.ITERATION_LIMIT:
        raise NumericalBreakdown(f"simplex exceeded {cap} iterations")
    x = np.clip(xs[:n], lo, hi)
    if code == _simplex.INFEASIBLE:
        return Status.INFEASIBLE, x, its
    if code == _simplex.UNBOUNDED:
        return Status.UNBOUNDED, x, its
    return Status.OPTIMAL, x, its


def _objective(c, x, status, sense_max):
    if status is Status.OPTIMAL:
        return float(np.dot(c, x))
    if status is Status.UNBOUNDED:
        return math.inf if sense_max else -math.inf
    return -math.inf if sense_max else math.inf


class _Arrays:
    """Dense view of a problem, built once per solve."""

    def __init__(self, problem: MilpProblem):
        self.A, self.b, self.rel = problem.dense()
        self.c = np.asarray(problem.objective, dtype=float)
        self.lo = np.array([bd[0] for bd in problem.bounds], dtype=float)
        self.hi = np.array([bd[1] for bd in problem.bounds], dtype=float)
        self.sense_max = problem.sense is Sense.MAXIMIZE
        self.cap = _iteration_cap(problem.n_vars, len(problem.constraints))

    def solve(self, lo=None, hi=None):
        lo = self.lo if lo is None else lo
        hi = self.hi if hi is None else hi
        return _solve_arrays(self.A, self.b, self.rel, self.c, lo, hi, self.sense_max, self.cap)


def solve_lp(problem: MilpProblem) -> MilpSolution:
    """Solve the continuous relaxation of ``problem`` (binaries treated as [lo, hi])."""
    arr = _Arrays(problem)
    status, x, its = arr.solve()
    return MilpSolution(status, x, _objective(arr.c, x, status, arr.sense_max), 0, its)


def _is_better(value: float, incumbent: float, sense_max: bool) -> bool:
    tol = 1e-9 * (1.0 + abs(incumbent)) if math.isfinite(incumbent) else 0.0
    return value > incumbent + tol if sense_max else value < incumbent - tol


def _integral_objective(problem: MilpProblem) -> bool:
    """True when every feasible point has an integer objective value: only
    binaries carry cost, each with an integer coefficient."""
    kinds = problem.var_kinds
    for j, cj in enumerate(problem.objective):
        if cj == 0.0:
            continue
        if kinds[j] is not VarKind.BINARY or cj != math.floor(cj):
            return False
    return True


def _round_bound(bound: float, sense_max: bool) -> float:
    if not math.isfinite(bound):
        return bound
    return math.floor(bound + INT_TOL) if sense_max else math.ceil(bound - INT_TOL)


def solve_milp(problem: MilpProblem, node_cap: int = DEFAULT_NODE_CAP) -> MilpSolution:
    """Best-first branch and bound over the binary variables.

    Nodes are ordered by relaxation bound; the most fractional binary is
    branched on (lowest index on ties) and the up branch is queued first so
    it wins bound ties.  Raises :class:`CapExceeded` after ``node_cap`` nodes.
    """
    arr = _Arrays(problem)
    sense_max = arr.sense_max
    sign = 1.0 if sense_max else -1.0  # heap is a min-heap on -sign*bound
    binaries = np.array(problem.binaries, dtype=int)
    # with an integer-valued objective a node can be pruned once its rounded
    # bound cannot beat the incumbent
    integral = _integral_objective(problem)

    incumbent: MilpSolution | None = None
    best = -math.inf if sense_max else math.inf
    unbounded = False
    nodes = 0
    iterations = 0
    counter = itertools.count()
    heap = [(-math.inf, -next(counter), arr.lo.copy(), arr.hi.copy())]
    while heap:
        key, _, lo, hi = heapq.heappop(heap)
        bound = -key * sign
        if integral:
            bound = _round_bound(bound, sense_max)
        if incumbent is not None and not _is_better(bound, best, sense_max):
            continue
        if nodes >= node_cap:
            raise CapExceeded(f"node cap {node_cap} reached", incumbent)
        nodes += 1
        status, x, its = arr.solve(lo, hi)
        iterations += its
        if status is Status.INFEASIBLE:
            continue
        if status is Status.UNBOUNDED:
            free = [j for j in binaries if lo[j] < hi[j]]
            if not free:
                unbounded = True
                break
            j = free[0]
            children = [(0.0, 0.0), (1.0, 1.0)]
            node_bound = math.inf if sense_max else -math.inf
        else:
            value = float(np.dot(arr.c, x))
            rounded = _round_bound(value, sense_max) if integral else value
            if incumbent is not None and not _is_better(rounded, best, sense_max):
                continue
            frac = np.abs(x[binaries] - np.round(x[binaries])) if len(binaries) else np.array([])
            if len(frac) == 0 or frac.max() <= INT_TOL:
                xi = x.copy()
                if len(binaries):
                    xi[binaries] = np.round(xi[binaries])
                incumbent = MilpSolution(Status.OPTIMAL, xi, float(np.dot(arr.c, xi)), 0, 0)
                best = incumbent.objective_value
                continue
            # most fractional: distance to nearest integer, ties to lowest index
            k = int(np.argmax(frac))
            j = int(binaries[k])
            children = [(0.0, 0.0), (1.0, 1.0)]
            node_bound = value
        for clo, chi in children:
            nlo, nhi = lo.copy(), hi.copy()
            nlo[j], nhi[j] = max(lo[j], clo), min(hi[j], chi)
            if nlo[j] > nhi[j]:
                continue
            heapq.heappush(heap, (-sign * node_bound, -next(counter), nlo, nhi))

    if unbounded:
        n = problem.n_vars
        return MilpSolution(Status.UNBOUNDED, np.zeros(n), math.inf * sign, nodes, iterations)
    if incumbent is None:
        return MilpSolution(Status.INFEASIBLE, np.zeros(problem.n_vars), -math.inf * sign,
                            nodes, iterations)
    incumbent.node_count = nodes
    incumbent.iterations = iterations
    return incumbent


def enumerate_oracle(problem: MilpProblem) -> MilpSolution:
    """Exhaustively fix every binary assignment and solve the continuous rest.

    Assignments are visited in lexicographic order and only a strictly better
    objective replaces the incumbent, so the lowest optimal assignment wins.
    """
    binaries = problem.binaries
    if len(binaries) > ORACLE_MAX_BINARIES:
        raise TooManyBinaries(f"{len(binaries)} binaries exceeds oracle cap {ORACLE_MAX_BINARIES}")
    arr = _Arrays(problem)
    cont = [j for j in range(problem.n_vars) if j not in set(binaries)]
    A_c = arr.A[:, cont]
    A_b = arr.A[:, binaries]
    c_c = arr.c[cont]
    c_b = arr.c[binaries]
    lo_c, hi_c = arr.lo[cont], arr.hi[cont]
    lo_b, hi_b = arr.lo[binaries], arr.hi[binaries]
    cap = arr.cap
    # rows with no continuous coefficient become pure feasibility checks
    live = np.any(A_c != 0, axis=1) if len(cont) else np.zeros(len(arr.b), dtype=bool)
    rel_live = [r for r, keep in zip(arr.rel, live) if keep]
    rel_dead = [r for r, keep in zip(arr.rel, live) if not keep]
    A_c_live = A_c[live]

    best = -math.inf if arr.sense_max else math.inf
    best_x = None
    saw_unbounded = False
    for bits in itertools.product((0.0, 1.0), repeat=len(binaries)):
        z = np.array(bits)
        if np.any(z < lo_b - INT_TOL) or np.any(z > hi_b + INT_TOL):
            continue
        rhs = arr.b - A_b @ z if len(binaries) else arr.b.copy()
        dead = rhs[~live]
        if not _rows_hold(dead, rel_dead):
            continue
        if cont:
            status, xc, _ = _solve_arrays(A_c_live, rhs[live], rel_live, c_c, lo_c, hi_c,
                                          arr.sense_max, cap)
        else:
            status, xc = Status.OPTIMAL, np.zeros(0)
        if status is Status.INFEASIBLE:
            continue
        if status is Status.UNBOUNDED:
            saw_unbounded = True
            break
        value = float(np.dot(c_c, xc) + np.dot(c_b, z))
        if best_x is None or _is_better(value, best, arr.sense_max):
            best = value
            x = np.zeros(problem.n_vars)
            x[cont] = xc
            x[binaries] = z
            best_x = x
    n = problem.n_vars
    sign = 1.0 if arr.sense_max else -1.0
    if saw_unbounded:
        return MilpSolution(Status.UNBOUNDED, np.zeros(n), math.inf * sign)
    if best_x is None:
        return MilpSolution(Status.INFEASIBLE, np.zeros(n), -math.inf * sign)
    return MilpSolution(Status.OPTIMAL, best_x, float(np.dot(arr.c, best_x)))


def _rows_hold(residual: np.ndarray, rel: list[Relation]) -> bool:
    """Check ``0 (rel) residual`` for rows whose continuous part is empty."""
    for r, v in zip(rel, residual):
        tol = FEAS_TOL * (1.0 + abs(v))
        if r is Relation.LE and v < -tol:
            return False
        if r is Relation.GE and v > tol:
            return False
        if r is Relation.EQ and abs(v) > tol:
            return False
    return True
