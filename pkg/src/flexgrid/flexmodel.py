"""Domain types shared across the package, plus JSON/CSV (de)serialization.

Types are frozen dataclasses and carry no validation of their own, so that a
broken site can still be represented and reported on; :func:`validate_site`
does the checking and returns violations as data.
"""

from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

FORMAT_VERSION = 1
DEFAULT_STEP_MINUTES = 15
WEEKDAYS = ("mon", "tue", "wed", "thu", "fri", "sat", "sun")


class LoadClass(enum.Enum):
    SHIFTABLE_PROFILE = "shiftable_profile"
    SHIFTABLE_VOLUME = "shiftable_volume"
    CURTAILABLE_REDUCIBLE = "curtailable_reducible"
    CURTAILABLE_DISCONNECTABLE = "curtailable_disconnectable"
    INFLEXIBLE = "inflexible"


class AssetKind(enum.Enum):
    LOAD = "load"
    STORAGE = "storage"
    GENERATION = "generation"


class Season(enum.Enum):
    WINTER = "winter"
    SUMMER = "summer"
    TRANSITIONAL = "transitional"


class Direction(enum.Enum):
    DECREASE = "decrease"
    INCREASE = "increase"


class ConfigError(ValueError):
    """Input document could not be parsed into domain types."""


class IndexOutOfRange(IndexError):
    pass


@dataclass(frozen=True)
class FlexAsset:
    id: str
    name: str
    kind: AssetKind
    rated_power_kw: float
    load_class: LoadClass | None = None
    energy_capacity_kwh: float | None = None
    round_trip_efficiency: float | None = None
    sheddable: float = 0.0
    controllable: float = 0.0
    acceptable: float = 0.0


@dataclass(frozen=True)
class PowerDuration:
    power_kw: float
    duration_h: float


@dataclass(frozen=True)
class Availability:
    """Weekly calendar: for each weekday (Monday first) a tuple of
    ``(start_h, end_h)`` windows.  ``None`` in place of the calendar on a
    :class:`FlexibilityParameters` row means always available."""

    windows: tuple[tuple[tuple[float, float], ...], ...]

    @classmethod
    def always(cls) -> Availability:
        return cls(tuple(((0.0, 24.0),) for _ in WEEKDAYS))

    def permits(self, start: datetime, step_minutes: int) -> bool:
        """True when the whole step starting at ``start`` lies inside a window."""
        day = self.windows[start.weekday()]
        s = start.hour + start.minute / 60 + start.second / 3600
        e = s + step_minutes / 60
        return any(lo - 1e-9 <= s and e <= hi + 1e-9 for lo, hi in day)

    def total_hours(self) -> float:
        return sum(hi - lo for day in self.windows for lo, hi in day)


@dataclass(frozen=True)
class FlexibilityParameters:
    asset_id: str
    product_id: str
    flexible_power_kw: float
    max_duration_h: float
    tia_notice_h: float = 0.0
    preload: PowerDuration | None = None
    rebound: PowerDuration | None = None
    availability: Availability | None = None
    disutility_cost_per_event: float = 0.0
    shed_time_s: float = 0.0
    max_activations_per_day: int | None = None
    min_recovery_h: float = 0.0


@dataclass(frozen=True)
class FlexibilityMatrix:
    rows: tuple[FlexibilityParameters, ...] = ()

    def for_product(self, product_id: str) -> list[FlexibilityParameters]:
        return [r for r in self.rows if r.product_id == product_id]

    def products(self) -> list[str]:
        return sorted({r.product_id for r in self.rows})

    def __len__(self):
        return len(self.rows)


@dataclass(frozen=True)
class LoadProfile:
    start: datetime
    step_minutes: int
    values_kw: tuple[float, ...]
    season: Season = Season.WINTER

    @property
    def step_h(self) -> float:
        return self.step_minutes / 60

    def __len__(self):
        return len(self.values_kw)

    def array(self) -> np.ndarray:
        return np.asarray(self.values_kw, dtype=float)

    def timestamp(self, t: int) -> datetime:
        return self.start + timedelta(minutes=self.step_minutes * t)

    def index_of(self, ts: datetime) -> int:
        minutes = (ts - self.start).total_seconds() / 60
        t = minutes / self.step_minutes
        if abs(t - round(t)) > 1e-9:
            raise ValueError(f"{ts.isoformat()} is not on the {self.step_minutes}-minute grid")
        return int(round(t))

    def same_grid(self, other: LoadProfile) -> bool:
        return (self.start == other.start and self.step_minutes == other.step_minutes
                and len(self) == len(other))

    def resample(self, step_minutes: int) -> LoadProfile:
        """Average down to a coarser step or hold values for a finer one."""
        if step_minutes == self.step_minutes:
            return self
        if step_minutes > self.step_minutes:
            if step_minutes % self.step_minutes:
                raise ValueError(f"cannot resample {self.step_minutes} min to {step_minutes} min")
            k = step_minutes // self.step_minutes
            n = len(self) // k
            arr = self.array()[: n * k].reshape(n, k).mean(axis=1)
        else:
            if self.step_minutes % step_minutes:
                raise ValueError(f"cannot resample {self.step_minutes} min to {step_minutes} min")
            k = self.step_minutes // step_minutes
            arr = np.repeat(self.array(), k)
        return LoadProfile(self.start, step_minutes, tuple(float(v) for v in arr), self.season)


@dataclass(frozen=True)
class Product:
    product_id: str
    event_duration_h: float | None = None


@dataclass(frozen=True)
class StackLayer:
    """One layer of a cumulative source stack, e.g. ``HVAC = [ahu, vrf]``."""

    label: str
    asset_ids: tuple[str, ...]


@dataclass(frozen=True)
class AssessmentEvent:
    duration_h: float
    window_start: datetime


@dataclass(frozen=True)
class SiteConfig:
    site_name: str
    floor_area_m2: float
    assets: tuple[FlexAsset, ...]
    matrix: FlexibilityMatrix
    total_load: LoadProfile
    per_asset_profiles: Mapping[str, LoadProfile] = field(default_factory=dict)
    products: tuple[Product, ...] = ()
    stack: tuple[StackLayer, ...] = ()
    assessment_events: tuple[AssessmentEvent, ...] = ()
    # season -> asset_id -> replacement profile on the total-load grid
    seasonal_profiles: Mapping[Season, Mapping[str, LoadProfile]] = field(default_factory=dict)
    currency: str = "EUR"
    notes: tuple[str, ...] = ()

    def asset(self, asset_id: str) -> FlexAsset:
        for a in self.assets:
            if a.id == asset_id:
                return a
        raise KeyError(asset_id)

    def asset_ids(self) -> list[str]:
        return [a.id for a in self.assets]

    def product(self, product_id: str) -> Product | None:
        for p in self.products:
            if p.product_id == product_id:
                return p
        return None

    def profile_for(self, asset_id: str, season: Season | None = None) -> LoadProfile | None:
        if season is not None and season in self.seasonal_profiles:
            prof = self.seasonal_profiles[season].get(asset_id)
            if prof is not None:
                return prof
        return self.per_asset_profiles.get(asset_id)

    @property
    def step_minutes(self) -> int:
        return self.total_load.step_minutes

    def with_step(self, step_minutes: int) -> SiteConfig:
        """Copy with every profile resampled to ``step_minutes``."""
        if step_minutes == self.step_minutes:
            return self
        return SiteConfig(
            self.site_name, self.floor_area_m2, self.assets, self.matrix,
            self.total_load.resample(step_minutes),
            {k: v.resample(step_minutes) for k, v in self.per_asset_profiles.items()},
            self.products, self.stack, self.assessment_events,
            {s: {k: v.resample(step_minutes) for k, v in m.items()}
             for s, m in self.seasonal_profiles.items()},
            self.currency, self.notes,
        )


@dataclass(frozen=True)
class FlexEventRequest:
    product_id: str
    window_start: datetime
    duration_h: float
    direction: Direction = Direction.DECREASE
    min_power_kw: float = 0.0
    notice_given_h: float = 0.0
    energy_weight: tuple[float, ...] | None = None


@dataclass(frozen=True)
class Violation:
    kind: str
    field: str
    detail: str = ""

    def __str__(self):
        return f"{self.kind}({self.field}){': ' + self.detail if self.detail else ''}"


# --------------------------------------------------------------------------
# validation

def _in_unit(v: float) -> bool:
    return isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0


def _nonneg(v: float | None) -> bool:
    return v is not None and math.isfinite(v) and v >= 0


def _check_profile(prof: LoadProfile, where: str, out: list[Violation]):
    if prof.step_minutes <= 0 or 60 % prof.step_minutes:
        out.append(Violation("ProfileViolation", f"{where}.step_minutes",
                             "step must be a positive divisor of 60"))
    if not prof.values_kw:
        out.append(Violation("ProfileViolation", f"{where}.values_kw", "profile is empty"))
    for t, v in enumerate(prof.values_kw):
        if not (math.isfinite(v) and v >= 0):
            out.append(Violation("ProfileViolation", f"{where}.values_kw[{t}]",
                                 "values must be finite and >= 0"))
            break


def _check_availability(av: Availability, where: str, out: list[Violation]):
    if len(av.windows) != 7:
        out.append(Violation("AvailabilityViolation", where, "calendar needs 7 weekdays"))
        return
    for d, day in enumerate(av.windows):
        spans = sorted(day)
        for lo, hi in spans:
            if not (0 <= lo < hi <= 24):
                out.append(Violation("AvailabilityViolation", f"{where}.{WEEKDAYS[d]}",
                                     f"window ({lo}, {hi}) outside [0, 24)"))
        for (_, h0), (l1, _) in zip(spans, spans[1:]):
            if l1 < h0:
                out.append(Violation("AvailabilityViolation", f"{where}.{WEEKDAYS[d]}",
                                     "windows overlap"))


def validate_site(config: SiteConfig) -> list[Violation]:
    """Check every invariant of the site document; an empty list means valid."""
    out: list[Violation] = []
    ids = [a.id for a in config.assets]
    seen: set[str] = set()
    for i, a in enumerate(config.assets):
        where = f"assets[{i}]"
        if a.id in seen:
            out.append(Violation("DuplicateAsset", f"{where}.id", a.id))
        seen.add(a.id)
        for name in ("sheddable", "controllable", "acceptable"):
            if not _in_unit(getattr(a, name)):
                out.append(Violation("RangeViolation", f"{where}.{name}",
                                     f"{getattr(a, name)} not in [0, 1]"))
        if not _nonneg(a.rated_power_kw):
            out.append(Violation("RangeViolation", f"{where}.rated_power_kw", "must be >= 0"))
        if a.kind is AssetKind.STORAGE:
            if not _nonneg(a.energy_capacity_kwh):
                out.append(Violation("StorageViolation", f"{where}.energy_capacity_kwh",
                                     "storage needs a non-negative energy capacity"))
            eff = a.round_trip_efficiency
            if eff is None or not (0 < eff <= 1):
                out.append(Violation("RangeViolation", f"{where}.round_trip_efficiency",
                                     "must lie in (0, 1]"))
        else:
            if a.energy_capacity_kwh is not None:
                out.append(Violation("StorageViolation", f"{where}.energy_capacity_kwh",
                                     "only storage assets carry an energy capacity"))
        if a.kind is AssetKind.LOAD and a.load_class is None:
            out.append(Violation("KindViolation", f"{where}.load_class",
                                 "load assets need a load class"))
        if a.kind is not AssetKind.LOAD and a.load_class is not None:
            out.append(Violation("KindViolation", f"{where}.load_class",
                                 "storage and generation do not carry a load class"))

    by_id = {a.id: a for a in config.assets}
    product_ids = {p.product_id for p in config.products}
    pairs: set[tuple[str, str]] = set()
    for i, row in enumerate(config.matrix.rows):
        where = f"matrix[{i}]"
        asset = by_id.get(row.asset_id)
        if asset is None:
            out.append(Violation("UnknownAsset", row.asset_id, f"{where}.asset_id"))
        if product_ids and row.product_id not in product_ids:
            out.append(Violation("UnknownProduct", f"{where}.product_id", row.product_id))
        key = (row.asset_id, row.product_id)
        if key in pairs:
            out.append(Violation("DuplicateRow", f"{where}", f"{key} repeated"))
        pairs.add(key)
        if not _nonneg(row.flexible_power_kw):
            out.append(Violation("RangeViolation", f"{where}.flexible_power_kw", "must be >= 0"))
        elif asset is not None and row.flexible_power_kw > asset.rated_power_kw + 1e-9:
            out.append(Violation("ExceedsRating", f"{where}.flexible_power_kw",
                                 f"{row.flexible_power_kw} > rated {asset.rated_power_kw}"))
        if asset is not None and asset.load_class is LoadClass.INFLEXIBLE:
            out.append(Violation("InflexibleRow", f"{where}.asset_id",
                                 "inflexible assets carry no flexibility row"))
        if not (math.isfinite(row.max_duration_h) and row.max_duration_h > 0):
            out.append(Violation("RangeViolation", f"{where}.max_duration_h", "must be > 0"))
        for name in ("tia_notice_h", "disutility_cost_per_event", "shed_time_s", "min_recovery_h"):
            if not _nonneg(getattr(row, name)):
                out.append(Violation("RangeViolation", f"{where}.{name}", "must be >= 0"))
        for name in ("preload", "rebound"):
            pd = getattr(row, name)
            if pd is not None and not (_nonneg(pd.power_kw) and _nonneg(pd.duration_h)):
                out.append(Violation("RangeViolation", f"{where}.{name}", "must be >= 0"))
        mapd = row.max_activations_per_day
        if mapd is not None and not (isinstance(mapd, int) and mapd > 0):
            out.append(Violation("RangeViolation", f"{where}.max_activations_per_day",
                                 "must be a positive integer"))
        if row.availability is not None:
            _check_availability(row.availability, f"{where}.availability", out)

    _check_profile(config.total_load, "total_load", out)
    total = config.total_load.array()

    def check_asset_profile(aid: str, prof: LoadProfile, where: str):
        if aid not in by_id:
            out.append(Violation("UnknownAsset", aid, where))
            return
        _check_profile(prof, where, out)
        if not prof.same_grid(config.total_load):
            out.append(Violation("ProfileViolation", where, "must share the total-load time grid"))
            return
        if by_id[aid].kind is AssetKind.LOAD:
            over = np.nonzero(prof.array() > total + 1e-9)[0]
            if len(over):
                out.append(Violation("ProfileViolation", f"{where}.values_kw[{over[0]}]",
                                     "sub-metered load exceeds total load"))

    for aid, prof in sorted(config.per_asset_profiles.items()):
        check_asset_profile(aid, prof, f"per_asset_profiles.{aid}")
    for season, profs in config.seasonal_profiles.items():
        for aid, prof in sorted(profs.items()):
            check_asset_profile(aid, prof, f"seasonal_profiles.{season.value}.{aid}")

    for k, layer in enumerate(config.stack):
        if not layer.asset_ids:
            out.append(Violation("StackViolation", f"stack[{k}]", "empty layer"))
        for aid in layer.asset_ids:
            if aid not in by_id:
                out.append(Violation("UnknownAsset", aid, f"stack[{k}]"))
    for k, ev in enumerate(config.assessment_events):
        steps = ev.duration_h * 60 / config.total_load.step_minutes
        if ev.duration_h <= 0 or abs(steps - round(steps)) > 1e-9:
            out.append(Violation("EventViolation", f"assessment_events[{k}].duration_h",
                                 "duration must be a positive multiple of the step"))
    if not (math.isfinite(config.floor_area_m2) and config.floor_area_m2 > 0):
        out.append(Violation("RangeViolation", "floor_area_m2", "must be > 0"))
    return out


def total_load_at(config: SiteConfig, t: int) -> float:
    values = config.total_load.values_kw
    if not 0 <= t < len(values):
        raise IndexOutOfRange(f"timestep {t} outside profile of length {len(values)}")
    return values[t]


# --------------------------------------------------------------------------
# serialization

def _ts(s: str, where: str) -> datetime:
    try:
        return datetime.fromisoformat(s)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: invalid ISO-8601 timestamp {s!r}") from None


def _num(d: Mapping, key: str, where: str, default: Any = ...) -> Any:
    if key not in d or d[key] is None:
        if default is ...:
            raise ConfigError(f"{where}.{key}: missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key}: expected a number, got {v!r}")
    return v


def _enum(cls, value, where):
    try:
        return cls(value)
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise ConfigError(f"{where}: {value!r} is not one of {allowed}") from None


def read_profile_csv(path: str | Path, season: Season = Season.WINTER) -> LoadProfile:
    """Read a ``timestamp,load_kw`` CSV with uniform, strictly increasing stamps."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["timestamp", "load_kw"]:
            raise ConfigError(f"{path}:1: header must be 'timestamp,load_kw'")
        stamps: list[datetime] = []
        values: list[float] = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ConfigError(f"{path}:{lineno}: expected 2 columns")
            stamps.append(_ts(row[0].strip(), f"{path}:{lineno}"))
            try:
                values.append(float(row[1]))
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: load_kw {row[1]!r} is not a number") from None
    if not stamps:
        raise ConfigError(f"{path}: no data rows")
    if len(stamps) == 1:
        raise ConfigError(f"{path}: need at least two rows to infer the step")
    step = stamps[1] - stamps[0]
    for k in range(1, len(stamps)):
        if stamps[k] - stamps[k - 1] != step or step <= timedelta(0):
            raise ConfigError(f"{path}:{k + 2}: timestamps must be strictly increasing and uniform")
    minutes = step.total_seconds() / 60
    if minutes != int(minutes):
        raise ConfigError(f"{path}: step of {minutes} minutes is not whole")
    return LoadProfile(stamps[0], int(minutes), tuple(values), season)


def write_profile_csv(profile: LoadProfile, path: str | Path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "load_kw"])
        for t, v in enumerate(profile.values_kw):
            w.writerow([profile.timestamp(t).isoformat(), repr(float(v))])


def profile_from_json(d: Any, where: str, base_dir: Path | None = None) -> LoadProfile:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    season = _enum(Season, d.get("season", "winter"), f"{where}.season")
    if "csv" in d:
        path = Path(d["csv"])
        if base_dir is not None and not path.is_absolute():
            path = base_dir / path
        return read_profile_csv(path, season)
    values = d.get("values_kw")
    if not isinstance(values, list):
        raise ConfigError(f"{where}.values_kw: expected a list of numbers")
    for k, v in enumerate(values):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{where}.values_kw[{k}]: expected a number")
    step = d.get("step_minutes", DEFAULT_STEP_MINUTES)
    if not isinstance(step, int) or isinstance(step, bool):
        raise ConfigError(f"{where}.step_minutes: expected an integer")
    return LoadProfile(_ts(d.get("start"), f"{where}.start"), step,
                       tuple(float(v) for v in values), season)


def profile_to_json(p: LoadProfile) -> dict:
    return {"start": p.start.isoformat(), "step_minutes": p.step_minutes,
            "season": p.season.value, "values_kw": list(p.values_kw)}


def _pd_from_json(d, where):
    if d is None:
        return None
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected {{power_kw, duration_h}}")
    return PowerDuration(_num(d, "power_kw", where), _num(d, "duration_h", where))


def availability_from_json(d: Any, where: str) -> Availability | None:
    if d is None:
        return None
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected a weekday -> windows object")
    unknown = set(d) - set(WEEKDAYS) - {"*"}
    if unknown:
        raise ConfigError(f"{where}: unknown weekday keys {sorted(unknown)}")
    days = []
    for day in WEEKDAYS:
        spans = d.get(day, d.get("*", []))
        if not isinstance(spans, list):
            raise ConfigError(f"{where}.{day}: expected a list of [start_h, end_h]")
        parsed = []
        for k, span in enumerate(spans):
            if not (isinstance(span, list) and len(span) == 2):
                raise ConfigError(f"{where}.{day}[{k}]: expected [start_h, end_h]")
            parsed.append((float(span[0]), float(span[1])))
        days.append(tuple(parsed))
    return Availability(tuple(days))


def availability_to_json(av: Availability | None):
    if av is None:
        return None
    return {day: [list(w) for w in spans] for day, spans in zip(WEEKDAYS, av.windows)}


def asset_from_json(d: Any, where: str) -> FlexAsset:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    if not isinstance(d.get("id"), str):
        raise ConfigError(f"{where}.id: expected a string")
    kind = _enum(AssetKind, d.get("kind"), f"{where}.kind")
    lc = d.get("load_class")
    return FlexAsset(
        id=d["id"],
        name=str(d.get("name", d["id"])),
        kind=kind,
        rated_power_kw=float(_num(d, "rated_power_kw", where)),
        load_class=None if lc is None else _enum(LoadClass, lc, f"{where}.load_class"),
        energy_capacity_kwh=_num(d, "energy_capacity_kwh", where, None),
        round_trip_efficiency=_num(d, "round_trip_efficiency", where, None),
        sheddable=float(_num(d, "sheddable", where, 0.0)),
        controllable=float(_num(d, "controllable", where, 0.0)),
        acceptable=float(_num(d, "acceptable", where, 0.0)),
    )


def asset_to_json(a: FlexAsset) -> dict:
    return {
        "id": a.id, "name": a.name, "kind": a.kind.value,
        "load_class": None if a.load_class is None else a.load_class.value,
        "rated_power_kw": a.rated_power_kw,
        "energy_capacity_kwh": a.energy_capacity_kwh,
        "round_trip_efficiency": a.round_trip_efficiency,
        "sheddable": a.sheddable, "controllable": a.controllable, "acceptable": a.acceptable,
    }


def row_from_json(d: Any, where: str) -> FlexibilityParameters:
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    for key in ("asset_id", "product_id"):
        if not isinstance(d.get(key), str):
            raise ConfigError(f"{where}.{key}: expected a string")
    mapd = d.get("max_activations_per_day")
    if mapd is not None and (isinstance(mapd, bool) or not isinstance(mapd, int)):
        raise ConfigError(f"{where}.max_activations_per_day: expected an integer")
    return FlexibilityParameters(
        asset_id=d["asset_id"],
        product_id=d["product_id"],
        flexible_power_kw=float(_num(d, "flexible_power_kw", where)),
        max_duration_h=float(_num(d, "max_duration_h", where)),
        tia_notice_h=float(_num(d, "tia_notice_h", where, 0.0)),
        preload=_pd_from_json(d.get("preload"), f"{where}.preload"),
        rebound=_pd_from_json(d.get("rebound"), f"{where}.rebound"),
        availability=availability_from_json(d.get("availability"), f"{where}.availability"),
        disutility_cost_per_event=float(_num(d, "disutility_cost_per_event", where, 0.0)),
        shed_time_s=float(_num(d, "shed_time_s", where, 0.0)),
        max_activations_per_day=mapd,
        min_recovery_h=float(_num(d, "min_recovery_h", where, 0.0)),
    )


def row_to_json(r: FlexibilityParameters) -> dict:
    def pd(x):
        return None if x is None else {"power_kw": x.power_kw, "duration_h": x.duration_h}

    return {
        "asset_id": r.asset_id, "product_id": r.product_id,
        "flexible_power_kw": r.flexible_power_kw, "max_duration_h": r.max_duration_h,
        "tia_notice_h": r.tia_notice_h, "preload": pd(r.preload), "rebound": pd(r.rebound),
        "availability": availability_to_json(r.availability),
        "disutility_cost_per_event": r.disutility_cost_per_event,
        "shed_time_s": r.shed_time_s,
        "max_activations_per_day": r.max_activations_per_day,
        "min_recovery_h": r.min_recovery_h,
    }


def matrix_from_json(d: Any, where: str = "matrix") -> FlexibilityMatrix:
    if isinstance(d, Mapping):
        d = d.get("rows", [])
    if not isinstance(d, list):
        raise ConfigError(f"{where}: expected a list of rows")
    return FlexibilityMatrix(tuple(row_from_json(r, f"{where}[{i}]") for i, r in enumerate(d)))


def matrix_to_json(m: FlexibilityMatrix) -> dict:
    return {"format_version": FORMAT_VERSION, "rows": [row_to_json(r) for r in m.rows]}


def site_from_json(d: Any, base_dir: Path | None = None) -> SiteConfig:
    if not isinstance(d, Mapping):
        raise ConfigError("site: expected a JSON object")
    version = d.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigError(f"format_version: expected {FORMAT_VERSION}, got {version!r}")
    assets = d.get("assets", [])
    if not isinstance(assets, list):
        raise ConfigError("assets: expected a list")
    if "total_load" not in d:
        raise ConfigError("total_load: missing required field")
    products = []
    for i, p in enumerate(d.get("products", [])):
        where = f"products[{i}]"
        if isinstance(p, str):
            products.append(Product(p))
        elif isinstance(p, Mapping) and isinstance(p.get("product_id"), str):
            products.append(Product(p["product_id"], _num(p, "event_duration_h", where, None)))
        else:
            raise ConfigError(f"{where}: expected a product id or object")
    stack = []
    for i, layer in enumerate(d.get("stack", [])):
        where = f"stack[{i}]"
        if isinstance(layer, str):
            stack.append(StackLayer(layer, (layer,)))
        elif isinstance(layer, Mapping) and isinstance(layer.get("assets"), list):
            stack.append(StackLayer(str(layer.get("label", "+".join(layer["assets"]))),
                                    tuple(str(a) for a in layer["assets"])))
        else:
            raise ConfigError(f"{where}: expected an asset id or {{label, assets}}")
    events = []
    for i, ev in enumerate(d.get("assessment_events", [])):
        where = f"assessment_events[{i}]"
        if not isinstance(ev, Mapping):
            raise ConfigError(f"{where}: expected an object")
        events.append(AssessmentEvent(float(_num(ev, "duration_h", where)),
                                      _ts(ev.get("window_start"), f"{where}.window_start")))
    seasonal = {}
    for season_name, profs in d.get("seasonal_profiles", {}).items():
        season = _enum(Season, season_name, f"seasonal_profiles.{season_name}")
        seasonal[season] = {
            aid: profile_from_json(p, f"seasonal_profiles.{season_name}.{aid}", base_dir)
            for aid, p in profs.items()
        }
    return SiteConfig(
        site_name=str(d.get("site_name", "")),
        floor_area_m2=float(_num(d, "floor_area_m2", "site")),
        assets=tuple(asset_from_json(a, f"assets[{i}]") for i, a in enumerate(assets)),
        matrix=matrix_from_json(d.get("matrix", []), "matrix"),
        total_load=profile_from_json(d["total_load"], "total_load", base_dir),
        per_asset_profiles={
            aid: profile_from_json(p, f"per_asset_profiles.{aid}", base_dir)
            for aid, p in d.get("per_asset_profiles", {}).items()
        },
        products=tuple(products),
        stack=tuple(stack),
        assessment_events=tuple(events),
        seasonal_profiles=seasonal,
        currency=str(d.get("currency", "EUR")),
        notes=tuple(str(n) for n in d.get("notes", [])),
    )


def site_to_json(c: SiteConfig) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "site_name": c.site_name,
        "floor_area_m2": c.floor_area_m2,
        "currency": c.currency,
        "notes": list(c.notes),
        "products": [{"product_id": p.product_id, "event_duration_h": p.event_duration_h}
                     for p in c.products],
        "assets": [asset_to_json(a) for a in c.assets],
        "matrix": [row_to_json(r) for r in c.matrix.rows],
        "stack": [{"label": s.label, "assets": list(s.asset_ids)} for s in c.stack],
        "assessment_events": [{"duration_h": e.duration_h,
                               "window_start": e.window_start.isoformat()}
                              for e in c.assessment_events],
        "total_load": profile_to_json(c.total_load),
        "per_asset_profiles": {k: profile_to_json(v) for k, v in c.per_asset_profiles.items()},
        "seasonal_profiles": {s.value: {k: profile_to_json(v) for k, v in m.items()}
                              for s, m in c.seasonal_profiles.items()},
    }


def load_json(path: str | Path) -> Any:
    """Parse a JSON file; decode errors are re-raised as :class:`ConfigError`
    naming line, column and byte offset."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg} "
                          f"(byte offset {len(text[:exc.pos].encode('utf-8'))})") from None


def load_site(path: str | Path) -> SiteConfig:
    path = Path(path)
    return site_from_json(load_json(path), path.parent)


def dump_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=False, ensure_ascii=False) + "\n"


def event_from_json(d: Any, where: str = "event") -> FlexEventRequest:
    """Parse the minimal DR event envelope
    ``{product, window: {start, duration_h}, min_power, direction, notice}``."""
    if not isinstance(d, Mapping):
        raise ConfigError(f"{where}: expected an object")
    if not isinstance(d.get("product"), str):
        raise ConfigError(f"{where}.product: expected a string")
    window = d.get("window")
    if not isinstance(window, Mapping):
        raise ConfigError(f"{where}.window: expected {{start, duration_h}}")
    weights = d.get("energy_weight")
    if weights is not None:
        if not isinstance(weights, list):
            raise ConfigError(f"{where}.energy_weight: expected a list")
        weights = tuple(float(w) for w in weights)
    return FlexEventRequest(
        product_id=d["product"],
        window_start=_ts(window.get("start"), f"{where}.window.start"),
        duration_h=float(_num(window, "duration_h", f"{where}.window")),
        direction=_enum(Direction, d.get("direction", "decrease"), f"{where}.direction"),
        min_power_kw=float(_num(d, "min_power", where, 0.0)),
        notice_given_h=float(_num(d, "notice", where, 0.0)),
        energy_weight=weights,
    )


def event_to_json(e: FlexEventRequest) -> dict:
    return {
        "product": e.product_id,
        "window": {"start": e.window_start.isoformat(), "duration_h": e.duration_h},
        "min_power": e.min_power_kw,
        "direction": e.direction.value,
        "notice": e.notice_given_h,
        "energy_weight": None if e.energy_weight is None else list(e.energy_weight),
    }
