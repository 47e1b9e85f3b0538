"""DR event scheduling: event impact tables and the MILP objectives built on them.

Every scheduler works on an :class:`EventImpactTable` (deliverable kW per
resource and step, plus an availability mask) and activates resources through
binary ``Res(t, r)`` variables:

* :func:`max_revenue_schedule` - weighted delivered energy,
* :func:`max_bid_duration_schedule` - number of steps meeting a minimum power,
* :func:`max_peak_power_schedule` - best single-step delivered power,
* :func:`stochastic_schedule` - expected cost over price scenarios
  (deterministic equivalent, activation decisions shared by all scenarios).
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from flexgrid.flexmodel import (
    AssetKind,
    Direction,
    FlexEventRequest,
    FlexibilityParameters,
    SiteConfig,
    Season,
)
from flexgrid.milp import (
    DEFAULT_NODE_CAP,
    FEAS_TOL,
    MilpSolution,
    ProblemBuilder,
    Relation,
    Sense,
    SolverError,
    Status,
    solve_milp,
)


class UnknownProduct(KeyError):
    pass


class EmptyWindow(ValueError):
    pass


class ProbabilityMass(ValueError):
    pass


class InfeasibleSchedule(SolverError):
    pass


class ObjectiveKind(enum.Enum):
    REVENUE = "revenue"
    BID_DURATION = "bid_duration"
    PEAK_POWER = "peak_power"
    STOCHASTIC_COST = "stochastic_cost"


@dataclass(eq=False)
class EventImpactTable:
    resources: list[str]
    timesteps: list[int]
    impact_kw: np.ndarray  # (T, R)
    available: np.ndarray  # (T, R) bool
    step_h: float
    rows: list[FlexibilityParameters | None] = field(default_factory=list)
    kinds: list[AssetKind | None] = field(default_factory=list)
    direction: Direction = Direction.DECREASE
    start: datetime | None = None
    duration_h: float | None = None

    def __post_init__(self):
        self.impact_kw = np.asarray(self.impact_kw, dtype=float).reshape(
            len(self.timesteps), len(self.resources))
        self.available = np.asarray(self.available, dtype=bool).reshape(self.impact_kw.shape)
        if not self.rows:
            self.rows = [None] * len(self.resources)
        if not self.kinds:
            self.kinds = [None] * len(self.resources)
        if np.any(self.impact_kw < 0) or not np.all(np.isfinite(self.impact_kw)):
            raise ValueError("impact_kw must be finite and >= 0")

    @property
    def n_steps(self) -> int:
        return len(self.timesteps)

    @property
    def n_resources(self) -> int:
        return len(self.resources)

    def effective_impact(self) -> np.ndarray:
        return np.where(self.available, self.impact_kw, 0.0)

    def restrict(self, resources: Sequence[str]) -> EventImpactTable:
        keep = [k for k, r in enumerate(self.resources) if r in set(resources)]
        return EventImpactTable(
            [self.resources[k] for k in keep], list(self.timesteps),
            self.impact_kw[:, keep], self.available[:, keep], self.step_h,
            [self.rows[k] for k in keep], [self.kinds[k] for k in keep],
            self.direction, self.start, self.duration_h,
        )

    def step_slice(self, t: int) -> EventImpactTable:
        return EventImpactTable(
            list(self.resources), [self.timesteps[t]],
            self.impact_kw[t:t + 1], self.available[t:t + 1], self.step_h,
            list(self.rows), list(self.kinds), self.direction,
            None if self.start is None else self.start + timedelta(hours=t * self.step_h),
            self.step_h,
        )


@dataclass(frozen=True)
class Obligation:
    resource: str
    kind: str  # "preload" or "rebound"
    power_kw: float
    duration_h: float

    @property
    def energy_kwh(self) -> float:
        return self.power_kw * self.duration_h


@dataclass(eq=False)
class Schedule:
    resources: list[str]
    activation: np.ndarray  # (T, R) bool, Res(t, r)
    bid_active: np.ndarray  # (T,) bool
    power_trace_kw: np.ndarray  # (T,)
    objective_value: float
    objective_kind: ObjectiveKind
    node_count: int = 0
    obligations: list[Obligation] = field(default_factory=list)
    scenario_costs: list[float] = field(default_factory=list)

    @property
    def bid_duration_steps(self) -> int:
        return int(self.bid_active.sum())

    @property
    def active_steps(self) -> int:
        return int(self.activation.any(axis=1).sum())


@dataclass(frozen=True)
class Scenario:
    probability: float
    energy_price: tuple[float, ...]  # per kWh, per step
    peak_price: float  # per kW of the scenario's peak import
    import_quantities: tuple[float, ...]  # baseline net demand, kW per step
    export_price: tuple[float, ...]  # per kWh exported, per step
    export_quantities: tuple[float, ...]  # export limit, kW per step


@dataclass(frozen=True)
class Converter:
    resource_id: str
    startup_cost: float


@dataclass(frozen=True)
class CurtailableDevice:
    resource_id: str
    disutility_cost: float | None = None  # None: take it from the matrix row


@dataclass(frozen=True)
class StochasticProgram:
    scenarios: tuple[Scenario, ...]
    converters: tuple[Converter, ...] = ()
    curtailable_devices: tuple[CurtailableDevice, ...] = ()


# --------------------------------------------------------------------------
# impact table

def _steps(duration_h: float, step_minutes: int) -> int:
    n = duration_h * 60 / step_minutes
    if abs(n - round(n)) > 1e-9:
        raise EmptyWindow(f"duration {duration_h} h is not a whole number of "
                          f"{step_minutes}-minute steps")
    return int(round(n))


def build_event_impact(config: SiteConfig, event: FlexEventRequest,
                       season: Season | None = None,
                       assets: Sequence[str] | None = None) -> EventImpactTable:
    """Deliverable power per (step, resource) for ``event``.

    One resource per matrix row of the event's product.  Loads deliver their
    characterized fraction of the sub-metered level (capped at the row's
    flexible power), generation its forecast output, storage its power
    rating capped by usable energy spread over the event duration.
    """
    known = {p.product_id for p in config.products} | set(config.matrix.products())
    if event.product_id not in known:
        raise UnknownProduct(event.product_id)
    profile = config.total_load
    n = _steps(event.duration_h, profile.step_minutes)
    if n <= 0:
        raise EmptyWindow("event window has no timesteps")
    try:
        t0 = profile.index_of(event.window_start)
    except ValueError as exc:
        raise EmptyWindow(str(exc)) from None
    if t0 < 0 or t0 + n > len(profile):
        raise EmptyWindow(f"window [{t0}, {t0 + n}) outside profile of {len(profile)} steps")
    if event.energy_weight is not None and len(event.energy_weight) != n:
        raise ValueError(f"energy_weight has {len(event.energy_weight)} entries, expected {n}")

    rows = config.matrix.for_product(event.product_id)
    if assets is not None:
        rows = [r for r in rows if r.asset_id in set(assets)]
    steps = list(range(t0, t0 + n))
    impact = np.zeros((n, len(rows)))
    available = np.zeros((n, len(rows)), dtype=bool)
    kinds = []
    for k, row in enumerate(rows):
        asset = config.asset(row.asset_id)
        kinds.append(asset.kind)
        prof = config.profile_for(asset.id, season)
        if asset.kind is AssetKind.STORAGE:
            usable = (asset.energy_capacity_kwh or 0.0) * (asset.round_trip_efficiency or 1.0)
            impact[:, k] = min(row.flexible_power_kw, usable / event.duration_h)
        elif prof is None:
            impact[:, k] = row.flexible_power_kw
        elif asset.kind is AssetKind.GENERATION:
            impact[:, k] = np.minimum(row.flexible_power_kw, prof.array()[t0:t0 + n])
        else:
            frac = row.flexible_power_kw / asset.rated_power_kw if asset.rated_power_kw > 0 else 0.0
            impact[:, k] = np.minimum(row.flexible_power_kw, frac * prof.array()[t0:t0 + n])
        gate = (event.notice_given_h + 1e-9 >= row.tia_notice_h
                and event.duration_h <= row.max_duration_h + 1e-9)
        for i, t in enumerate(steps):
            ok = gate
            if ok and row.availability is not None:
                ok = row.availability.permits(profile.timestamp(t), profile.step_minutes)
            available[i, k] = ok
    return EventImpactTable(
        resources=[r.asset_id for r in rows], timesteps=steps, impact_kw=impact,
        available=available, step_h=profile.step_h, rows=list(rows), kinds=kinds,
        direction=event.direction, start=event.window_start, duration_h=event.duration_h,
    )


# --------------------------------------------------------------------------
# model assembly

def _add_res_vars(b: ProblemBuilder, table: EventImpactTable) -> list[list[int]]:
    res = []
    for t in range(table.n_steps):
        res.append([b.add_binary(f"res[{t},{table.resources[r]}]",
                                 fixed_zero=not table.available[t, r])
                    for r in range(table.n_resources)])
    return res


def _add_start_vars(b: ProblemBuilder, res: list[list[int]], r: int, name: str,
                    prefix: str = "start") -> list[int]:
    """Continuous start indicators ``s(t) >= Res(t) - Res(t-1)``.

    ``s`` only appears in <= rows or with a nonnegative cost, so it sits at 1
    exactly on real starts without being declared binary.
    """
    starts = []
    for t in range(len(res)):
        s = b.add_var(f"{prefix}[{t},{name}]", lo=0.0, hi=1.0)
        coefs = {s: 1.0, res[t][r]: -1.0}
        if t > 0:
            coefs[res[t - 1][r]] = 1.0
        b.add_constraint(coefs, Relation.GE, 0.0)
        starts.append(s)
    return starts


def apply_activation_constraints(b: ProblemBuilder, res: list[list[int]],
                                 rows: Sequence[FlexibilityParameters | None],
                                 step_h: float) -> ProblemBuilder:
    """Add per-resource activation limits to a model holding ``Res(t, r)``.

    * at most ``max_activations_per_day`` activation starts,
    * after a block ends, the idle step that closes it plus ``min_recovery_h``
      must pass before the next start (so with one recovery step, 1,0,1 is
      infeasible and 1,0,0,1 is allowed),
    * no run of consecutive active steps longer than ``max_duration_h``.

    Constraints that cannot bind on this horizon are skipped.
    """
    T = len(res)
    for r, row in enumerate(rows):
        if row is None or T == 0:
            continue
        label = str(r)
        recovery = int(math.ceil(row.min_recovery_h / step_h - 1e-9)) if row.min_recovery_h > 0 else 0
        max_starts = row.max_activations_per_day
        need_starts = (max_starts is not None and max_starts < (T + 1) // 2) or (recovery > 0 and T > 2)
        if need_starts:
            starts = _add_start_vars(b, res, r, label)
            if max_starts is not None and max_starts < (T + 1) // 2:
                b.add_constraint({s: 1.0 for s in starts}, Relation.LE, float(max_starts))
            if recovery > 0:
                for t in range(2, T):
                    for tp in range(max(0, t - recovery - 1), t - 1):
                        b.add_constraint({starts[t]: 1.0, res[tp][r]: 1.0}, Relation.LE, 1.0)
        D = int(math.floor(row.max_duration_h / step_h + 1e-9))
        if D < T:
            for t in range(T - D):
                b.add_constraint({res[t + k][r]: 1.0 for k in range(D + 1)}, Relation.LE, float(D))
    return b


def _solve(b: ProblemBuilder, node_cap: int) -> tuple[MilpSolution, np.ndarray]:
    sol = solve_milp(b.build(), node_cap=node_cap)
    if sol.status is Status.INFEASIBLE:
        raise InfeasibleSchedule("the scheduling model has no feasible activation plan")
    if sol.status is Status.UNBOUNDED:
        raise InfeasibleSchedule("the scheduling model is unbounded")
    return sol, sol.values


def _decode(table: EventImpactTable, res: list[list[int]], x: np.ndarray) -> np.ndarray:
    act = np.zeros((table.n_steps, table.n_resources), dtype=bool)
    for t in range(table.n_steps):
        for r in range(table.n_resources):
            act[t, r] = x[res[t][r]] > 0.5
    return act & table.available


def power_trace(table: EventImpactTable, activation: np.ndarray) -> np.ndarray:
    return (activation * table.impact_kw).sum(axis=1)


def _obligations(table: EventImpactTable, activation: np.ndarray) -> list[Obligation]:
    out = []
    for r, row in enumerate(table.rows):
        if row is None or not activation[:, r].any():
            continue
        for kind in ("preload", "rebound"):
            pd = getattr(row, kind)
            if pd is not None and pd.power_kw > 0 and pd.duration_h > 0:
                out.append(Obligation(table.resources[r], kind, pd.power_kw, pd.duration_h))
    return out


def _schedule(table, act, bid, value, kind, sol, **kw) -> Schedule:
    return Schedule(
        resources=list(table.resources), activation=act, bid_active=bid,
        power_trace_kw=power_trace(table, act), objective_value=value, objective_kind=kind,
        node_count=sol.node_count, obligations=_obligations(table, act), **kw,
    )


def _empty_schedule(table: EventImpactTable, kind: ObjectiveKind, value=0.0) -> Schedule:
    act = np.zeros((table.n_steps, table.n_resources), dtype=bool)
    return Schedule(list(table.resources), act, np.zeros(table.n_steps, dtype=bool),
                    np.zeros(table.n_steps), value, kind)


# --------------------------------------------------------------------------
# objectives

def max_revenue_schedule(table: EventImpactTable, weights: Sequence[float] | None = None,
                         step_h: float | None = None,
                         node_cap: int = DEFAULT_NODE_CAP) -> Schedule:
    """Maximize weighted delivered energy ``sum Res * impact * weight * step_h``."""
    step_h = table.step_h if step_h is None else step_h
    w = np.ones(table.n_steps) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (table.n_steps,):
        raise ValueError(f"expected {table.n_steps} weights, got {w.shape}")
    if np.any(w < 0):
        raise ValueError("weights must be >= 0")
    if table.n_resources == 0:
        return _empty_schedule(table, ObjectiveKind.REVENUE)
    b = ProblemBuilder(Sense.MAXIMIZE)
    res = _add_res_vars(b, table)
    for t in range(table.n_steps):
        for r in range(table.n_resources):
            b.set_objective(res[t][r], table.impact_kw[t, r] * w[t] * step_h)
    apply_activation_constraints(b, res, table.rows, table.step_h)
    sol, x = _solve(b, node_cap)
    act = _decode(table, res, x)
    value = float((power_trace(table, act) * w).sum() * step_h)
    return _schedule(table, act, act.any(axis=1), value, ObjectiveKind.REVENUE, sol)


def _bid_model(table: EventImpactTable, min_power_kw: float, contiguous: bool):
    b = ProblemBuilder(Sense.MAXIMIZE)
    res = _add_res_vars(b, table)
    bid = [b.add_binary(f"bid[{t}]", obj=1.0) for t in range(table.n_steps)]
    for t in range(table.n_steps):
        coefs = {res[t][r]: table.impact_kw[t, r] for r in range(table.n_resources)}
        coefs[bid[t]] = -min_power_kw
        b.add_constraint(coefs, Relation.GE, 0.0)
    if contiguous:
        starts = []
        for t in range(table.n_steps):
            s = b.add_var(f"bidstart[{t}]", lo=0.0, hi=1.0)
            coefs = {s: 1.0, bid[t]: -1.0}
            if t > 0:
                coefs[bid[t - 1]] = 1.0
            b.add_constraint(coefs, Relation.GE, 0.0)
            starts.append(s)
        b.add_constraint({s: 1.0 for s in starts}, Relation.LE, 1.0)
    apply_activation_constraints(b, res, table.rows, table.step_h)
    return b.build(), res, bid


def _refill_starts(problem, x: np.ndarray, res: list[list[int]], bid: list[int]):
    """Set every continuous start indicator to its tightest value for the
    binaries currently in ``x``."""
    for j, name in enumerate(problem.names):
        if name.startswith("start["):
            t, r = (int(v) for v in name[6:-1].split(","))
            prev = x[res[t - 1][r]] if t > 0 else 0.0
            x[j] = max(0.0, x[res[t][r]] - prev)
        elif name.startswith("bidstart["):
            t = int(name[9:-1])
            prev = x[bid[t - 1]] if t > 0 else 0.0
            x[j] = max(0.0, x[bid[t]] - prev)


def _trim_activations(problem, x: np.ndarray, table: EventImpactTable,
                      res: list[list[int]], bid: list[int]) -> np.ndarray:
    """Greedily switch off resource-steps the bid does not need, smallest
    contributors first, keeping every constraint satisfied."""
    A, rhs, rel = problem.dense()
    le = np.array([r is Relation.LE for r in rel])
    ge = np.array([r is Relation.GE for r in rel])
    scale = 1.0 + np.abs(rhs)

    def feasible(v):
        d = (A @ v - rhs) / scale
        return not (np.any(d[le] > FEAS_TOL) or np.any(-d[ge] > FEAS_TOL)
                    or np.any(np.abs(d[~(le | ge)]) > FEAS_TOL))

    x = x.copy()
    _refill_starts(problem, x, res, bid)
    order = np.argsort(table.effective_impact().sum(axis=0), kind="stable")
    changed = True
    while changed:
        changed = False
        for r in order:
            for t in range(table.n_steps):
                if x[res[t][r]] < 0.5:
                    continue
                trial = x.copy()
                trial[res[t][r]] = 0.0
                _refill_starts(problem, trial, res, bid)
                if feasible(trial):
                    x = trial
                    changed = True
    return x


def max_bid_duration_schedule(table: EventImpactTable, min_power_kw: float,
                              contiguous: bool = False,
                              node_cap: int = DEFAULT_NODE_CAP) -> Schedule:
    """Maximize the number of steps with ``BidActive(t) = 1`` where each live
    step must deliver at least ``min_power_kw``.

    Resource-steps the bid does not need are then switched off greedily, so
    the plan does not carry idle activations.
    """
    if min_power_kw < 0:
        raise ValueError("min_power_kw must be >= 0")
    if table.n_steps == 0:
        return _empty_schedule(table, ObjectiveKind.BID_DURATION)
    problem, res, bid = _bid_model(table, min_power_kw, contiguous)
    sol = solve_milp(problem, node_cap=node_cap)
    if sol.status is not Status.OPTIMAL:
        raise InfeasibleSchedule("the scheduling model has no feasible activation plan")
    x = _trim_activations(problem, sol.values, table, res, bid)
    act = _decode(table, res, x)
    bid_active = np.array([x[j] > 0.5 for j in bid], dtype=bool)
    return _schedule(table, act, bid_active, float(bid_active.sum()),
                     ObjectiveKind.BID_DURATION, sol)


def max_peak_power_schedule(table: EventImpactTable,
                            node_cap: int = DEFAULT_NODE_CAP) -> Schedule:
    """Maximize the largest single-step delivered power over the window.

    A binary selector picks the peak step; the auxiliary ``peak`` variable is
    bounded by that step's delivered power via a big-M row per step.
    """
    if table.n_steps == 0:
        return _empty_schedule(table, ObjectiveKind.PEAK_POWER)
    big_m = float(table.effective_impact().sum(axis=1).max()) if table.n_resources else 0.0
    b = ProblemBuilder(Sense.MAXIMIZE)
    res = _add_res_vars(b, table)
    peak = b.add_var("peak", lo=0.0, hi=big_m, obj=1.0)
    sel = [b.add_binary(f"peakstep[{t}]") for t in range(table.n_steps)]
    b.add_constraint({s: 1.0 for s in sel}, Relation.EQ, 1.0)
    for t in range(table.n_steps):
        coefs = {res[t][r]: -table.impact_kw[t, r] for r in range(table.n_resources)}
        coefs[peak] = 1.0
        coefs[sel[t]] = big_m
        b.add_constraint(coefs, Relation.LE, big_m)
    apply_activation_constraints(b, res, table.rows, table.step_h)
    sol, x = _solve(b, node_cap)
    act = _decode(table, res, x)
    trace = power_trace(table, act)
    return _schedule(table, act, np.array([x[j] > 0.5 for j in sel], dtype=bool),
                     float(trace.max()), ObjectiveKind.PEAK_POWER, sol)


def check_program(program: StochasticProgram, n_steps: int | None = None):
    total = sum(s.probability for s in program.scenarios)
    if not program.scenarios or abs(total - 1.0) > 1e-9:
        raise ProbabilityMass(f"scenario probabilities sum to {total!r}, expected 1")
    for k, s in enumerate(program.scenarios):
        if s.probability < 0:
            raise ProbabilityMass(f"scenario {k} has negative probability")
        series = (s.energy_price, s.import_quantities, s.export_price, s.export_quantities)
        values = [s.peak_price, *[v for seq in series for v in seq]]
        if not all(math.isfinite(v) for v in values):
            raise ValueError(f"scenario {k}: prices and quantities must be finite")
        if n_steps is not None and any(len(seq) != n_steps for seq in series):
            raise ValueError(f"scenario {k}: every series needs {n_steps} entries")
        if any(q < 0 for q in s.export_quantities):
            raise ValueError(f"scenario {k}: export limits must be >= 0")
    for c in program.converters:
        if not math.isfinite(c.startup_cost):
            raise ValueError(f"converter {c.resource_id}: startup cost must be finite")


def stochastic_schedule(program: StochasticProgram, table: EventImpactTable,
                        step_h: float | None = None,
                        node_cap: int = DEFAULT_NODE_CAP) -> Schedule:
    """Minimize expected site cost over price scenarios.

    Per scenario: energy import cost, a peak-import premium and export
    income; once: converter start-up costs and curtailment disutility.  The
    activation plan ``Res`` is shared by every scenario; import/export
    quantities are per scenario.
    """
    step_h = table.step_h if step_h is None else step_h
    T, R = table.n_steps, table.n_resources
    check_program(program, T)
    idx = {r: k for k, r in enumerate(table.resources)}
    sign = 1.0 if table.direction is Direction.DECREASE else -1.0

    b = ProblemBuilder(Sense.MINIMIZE)
    res = _add_res_vars(b, table)
    fixed_costs: list[tuple[int, float]] = []
    for conv in program.converters:
        if conv.resource_id not in idx:
            raise KeyError(f"converter {conv.resource_id!r} is not a resource of this event")
        for s in _add_start_vars(b, res, idx[conv.resource_id], conv.resource_id, "startup"):
            b.set_objective(s, conv.startup_cost)
            fixed_costs.append((s, conv.startup_cost))
    for dev in program.curtailable_devices:
        if dev.resource_id not in idx:
            raise KeyError(f"device {dev.resource_id!r} is not a resource of this event")
        r = idx[dev.resource_id]
        cost = dev.disutility_cost
        if cost is None:
            row = table.rows[r]
            cost = row.disutility_cost_per_event if row is not None else 0.0
        for s in _add_start_vars(b, res, r, dev.resource_id, "curtail"):
            b.set_objective(s, cost)
            fixed_costs.append((s, cost))

    scen_vars = []
    for k, sc in enumerate(program.scenarios):
        p = sc.probability
        peak = b.add_var(f"peak[{k}]", lo=0.0, obj=p * sc.peak_price)
        imp, exp = [], []
        for t in range(T):
            i = b.add_var(f"import[{t},{k}]", lo=0.0, obj=p * sc.energy_price[t] * step_h)
            e = b.add_var(f"export[{t},{k}]", lo=0.0, hi=sc.export_quantities[t],
                          obj=-p * sc.export_price[t] * step_h)
            coefs = {i: 1.0, e: -1.0}
            for r in range(R):
                coefs[res[t][r]] = sign * table.impact_kw[t, r]
            b.add_constraint(coefs, Relation.EQ, sc.import_quantities[t])
            b.add_constraint({peak: 1.0, i: -1.0}, Relation.GE, 0.0)
            imp.append(i)
            exp.append(e)
        scen_vars.append((peak, imp, exp))
    apply_activation_constraints(b, res, table.rows, table.step_h)
    sol, x = _solve(b, node_cap)
    act = _decode(table, res, x)

    fixed = sum(x[j] * c for j, c in fixed_costs)
    costs = []
    for sc, (peak, imp, exp) in zip(program.scenarios, scen_vars):
        cost = sc.peak_price * x[peak] + fixed
        for t in range(T):
            cost += sc.energy_price[t] * step_h * x[imp[t]] - sc.export_price[t] * step_h * x[exp[t]]
        costs.append(float(cost))
    return _schedule(table, act, act.any(axis=1), float(sol.objective_value),
                     ObjectiveKind.STOCHASTIC_COST, sol, scenario_costs=costs)


# --------------------------------------------------------------------------
# export

def schedule_to_csv(schedule: Schedule, table: EventImpactTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["timestep", "resource", "active", "impact_kw"])
    for i, t in enumerate(table.timesteps):
        for r, name in enumerate(schedule.resources):
            active = bool(schedule.activation[i, r])
            w.writerow([t, name, int(active), f"{table.impact_kw[i, r] if active else 0.0:.6f}"])
    return buf.getvalue()


def schedule_summary(schedule: Schedule, table: EventImpactTable) -> dict:
    summary = {
        "objective_kind": schedule.objective_kind.value,
        "objective_value": round(schedule.objective_value, 9),
        "duration_steps": schedule.bid_duration_steps
        if schedule.objective_kind is ObjectiveKind.BID_DURATION else schedule.active_steps,
        "duration_h": (schedule.bid_duration_steps
                       if schedule.objective_kind is ObjectiveKind.BID_DURATION
                       else schedule.active_steps) * table.step_h,
        "node_count": schedule.node_count,
        "peak_delivered_kw": round(float(schedule.power_trace_kw.max()), 9)
        if len(schedule.power_trace_kw) else 0.0,
        "direction": table.direction.value,
        "obligations": [
            {"resource": o.resource, "kind": o.kind, "power_kw": o.power_kw,
             "duration_h": o.duration_h} for o in schedule.obligations
        ],
    }
    if schedule.scenario_costs:
        summary["scenario_costs"] = [round(c, 9) for c in schedule.scenario_costs]
    return summary


def program_from_json(d, n_steps: int) -> StochasticProgram:
    """Parse ``{"scenarios": [...], "converters": [...], "curtailable_devices": [...]}``.

    Scalar series entries are broadcast over the event's ``n_steps``.
    """
    from flexgrid.flexmodel import ConfigError

    def series(v, where):
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return (float(v),) * n_steps
        if isinstance(v, list) and len(v) == n_steps:
            return tuple(float(x) for x in v)
        raise ConfigError(f"{where}: expected a number or a list of {n_steps} numbers")

    if not isinstance(d, dict) or not isinstance(d.get("scenarios"), list):
        raise ConfigError("stochastic: expected an object with a scenarios list")
    scenarios = []
    for k, s in enumerate(d["scenarios"]):
        where = f"stochastic.scenarios[{k}]"
        if not isinstance(s, dict):
            raise ConfigError(f"{where}: expected an object")
        try:
            scenarios.append(Scenario(
                probability=float(s["probability"]),
                energy_price=series(s.get("energy_price", 0.0), f"{where}.energy_price"),
                peak_price=float(s.get("peak_price", 0.0)),
                import_quantities=series(s.get("import_quantities", 0.0),
                                         f"{where}.import_quantities"),
                export_price=series(s.get("export_price", 0.0), f"{where}.export_price"),
                export_quantities=series(s.get("export_quantities", 0.0),
                                         f"{where}.export_quantities"),
            ))
        except KeyError as exc:
            raise ConfigError(f"{where}: missing {exc.args[0]}") from None
    converters = tuple(Converter(str(c["resource_id"]), float(c.get("startup_cost", 0.0)))
                       for c in d.get("converters", []))
    devices = tuple(CurtailableDevice(str(c["resource_id"]),
                                      None if c.get("disutility_cost") is None
                                      else float(c["disutility_cost"]))
                    for c in d.get("curtailable_devices", []))
    return StochasticProgram(tuple(scenarios), converters, devices)
