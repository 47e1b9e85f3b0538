"""Load characterization: audit answers -> load class -> flexibility matrix.

A load is flexible only when it is sheddable, controllable and acceptable;
its flexible fraction is ``S * min(C, A)`` and the deliverable power is that
fraction of the load level.  Storage and generation skip the S/C/A screen and
enter the matrix at their rating.

Per-load fractions are summed across assets without any interaction term.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from flexgrid.flexmodel import (
    AssetKind,
    ConfigError,
    FlexAsset,
    FlexibilityMatrix,
    FlexibilityParameters,
    LoadClass,
    PowerDuration,
    Product,
    SiteConfig,
    availability_from_json,
)


class DomainError(ValueError):
    pass


class MissingAnswers(ValueError):
    def __init__(self, asset_id: str):
        super().__init__(f"no audit answers for asset {asset_id!r}")
        self.asset_id = asset_id


class MissingEstimate(ValueError):
    def __init__(self, asset_id: str, field_name: str):
        super().__init__(f"asset {asset_id!r}: no estimate or default for {field_name!r}")
        self.asset_id = asset_id
        self.field = field_name


class ShiftOrCurtail(enum.Enum):
    SHIFT = "shift"
    CURTAIL = "curtail"
    DISCONNECT = "disconnect"
    NONE = "none"


# fields of FlexibilityParameters that an audit may estimate directly
ESTIMATE_FIELDS = (
    "max_duration_h", "tia_notice_h", "preload", "rebound", "availability",
    "disutility_cost_per_event", "shed_time_s", "max_activations_per_day", "min_recovery_h",
)


@dataclass(frozen=True)
class AuditAnswers:
    asset_id: str
    audit_type: int = 1
    is_sheddable: bool = False
    shed_fraction: float = 0.0
    has_control_point: bool = False
    controllable_fraction: float = 0.0
    acceptable_fraction: float = 0.0
    shift_or_curtail: ShiftOrCurtail = ShiftOrCurtail.NONE
    rebound_expected: bool = False
    parameter_estimates: Mapping[str, Any] = field(default_factory=dict)


def _check_fraction(name: str, v: float):
    if not (isinstance(v, (int, float)) and math.isfinite(v) and 0.0 <= v <= 1.0):
        raise DomainError(f"{name}={v!r} outside [0, 1]")


def flexibility_fraction(S: float, C: float, A: float) -> float:
    """Flexible share of a load: sheddable times the lesser of controllable
    and acceptable."""
    _check_fraction("S", S)
    _check_fraction("C", C)
    _check_fraction("A", A)
    return S * min(C, A)


def resource_potential(F: float, L: float) -> float:
    """Deliverable power (kW) of a load at level ``L`` kW with fraction ``F``."""
    _check_fraction("F", F)
    if not (math.isfinite(L) and L >= 0):
        raise DomainError(f"L={L!r} must be finite and >= 0")
    return F * L


def classify_load(answers: AuditAnswers) -> LoadClass:
    if (not answers.is_sheddable or not answers.has_control_point
            or answers.acceptable_fraction == 0):
        return LoadClass.INFLEXIBLE
    action = answers.shift_or_curtail
    if action is ShiftOrCurtail.SHIFT:
        return LoadClass.SHIFTABLE_PROFILE if answers.rebound_expected else LoadClass.SHIFTABLE_VOLUME
    if action is ShiftOrCurtail.CURTAIL:
        return LoadClass.CURTAILABLE_REDUCIBLE
    if action is ShiftOrCurtail.DISCONNECT:
        return LoadClass.CURTAILABLE_DISCONNECTABLE
    return LoadClass.INFLEXIBLE


def asset_fraction(asset: FlexAsset) -> float:
    """Flexible fraction of an asset from its stored S, C, A."""
    return flexibility_fraction(asset.sheddable, asset.controllable, asset.acceptable)


def _as_product(p: Product | str) -> Product:
    return p if isinstance(p, Product) else Product(str(p))


def _row_for(asset_id: str, product: Product, power: float, estimates: Mapping[str, Any],
             rebound_expected: bool, notes: list[str]) -> FlexibilityParameters:
    est = dict(estimates)
    unknown = set(est) - set(ESTIMATE_FIELDS)
    if unknown:
        raise ConfigError(f"{asset_id}: unknown parameter estimates {sorted(unknown)}")

    def default(name, value):
        notes.append(f"{asset_id}/{product.product_id}: default {name} = {value}")
        return value

    if "max_duration_h" in est:
        duration = float(est["max_duration_h"])
    elif product.event_duration_h is not None:
        duration = default("max_duration_h", float(product.event_duration_h))
    else:
        raise MissingEstimate(asset_id, "max_duration_h")

    rebound = est.get("rebound")
    if rebound is not None and not isinstance(rebound, PowerDuration):
        rebound = PowerDuration(float(rebound["power_kw"]), float(rebound["duration_h"]))
    if rebound is None and rebound_expected:
        rebound = default("rebound", PowerDuration(power, duration / 2))
    preload = est.get("preload")
    if preload is not None and not isinstance(preload, PowerDuration):
        preload = PowerDuration(float(preload["power_kw"]), float(preload["duration_h"]))
    availability = est.get("availability")
    if isinstance(availability, Mapping):
        availability = availability_from_json(availability, f"{asset_id}.availability")

    return FlexibilityParameters(
        asset_id=asset_id,
        product_id=product.product_id,
        flexible_power_kw=power,
        max_duration_h=duration,
        tia_notice_h=float(est["tia_notice_h"]) if "tia_notice_h" in est
        else default("tia_notice_h", 0.0),
        preload=preload,
        rebound=rebound,
        availability=availability,
        disutility_cost_per_event=float(est.get("disutility_cost_per_event", 0.0)),
        shed_time_s=float(est.get("shed_time_s", 0.0)),
        max_activations_per_day=int(est["max_activations_per_day"])
        if "max_activations_per_day" in est else default("max_activations_per_day", 1),
        min_recovery_h=float(est["min_recovery_h"]) if "min_recovery_h" in est
        else default("min_recovery_h", duration),
    )


def _characterize(assets: Sequence[FlexAsset], answers: Iterable[AuditAnswers],
                  products: Sequence[Product | str]):
    by_asset = {a.asset_id: a for a in answers}
    products = [_as_product(p) for p in products]
    rows: list[FlexibilityParameters] = []
    classes: dict[str, LoadClass | None] = {}
    notes: list[str] = []
    for asset in sorted(assets, key=lambda a: a.id):
        ans = by_asset.get(asset.id)
        if asset.kind is AssetKind.LOAD:
            if ans is None:
                raise MissingAnswers(asset.id)
            cls = classify_load(ans)
            classes[asset.id] = cls
            if cls is LoadClass.INFLEXIBLE:
                continue
            S = ans.shed_fraction if ans.is_sheddable else 0.0
            C = ans.controllable_fraction if ans.has_control_point else 0.0
            F = flexibility_fraction(S, C, ans.acceptable_fraction)
            power = resource_potential(F, asset.rated_power_kw)
            estimates = ans.parameter_estimates
            rebound_expected = ans.rebound_expected
        else:
            classes[asset.id] = None
            power = asset.rated_power_kw
            estimates = ans.parameter_estimates if ans is not None else {}
            rebound_expected = False
        for product in products:
            rows.append(_row_for(asset.id, product, power, estimates, rebound_expected, notes))
    return FlexibilityMatrix(tuple(rows)), classes, notes


def characterize_site(assets: Sequence[FlexAsset], answers: Iterable[AuditAnswers],
                      products: Sequence[Product | str]) -> FlexibilityMatrix:
    """Build the flexibility matrix: one row per (flexible asset, product).

    Inflexible loads are eliminated.  Rows are ordered by asset id, then by
    the order of ``products``.
    """
    matrix, _, _ = _characterize(assets, answers, products)
    return matrix


def apply_answers(assets: Sequence[FlexAsset], answers: Iterable[AuditAnswers]) -> tuple[FlexAsset, ...]:
    """Copy S/C/A fractions and the load class from audit answers onto assets."""
    by_asset = {a.asset_id: a for a in answers}
    out = []
    for asset in assets:
        ans = by_asset.get(asset.id)
        if asset.kind is AssetKind.LOAD and ans is not None:
            asset = replace(
                asset,
                load_class=classify_load(ans),
                sheddable=ans.shed_fraction if ans.is_sheddable else 0.0,
                controllable=ans.controllable_fraction if ans.has_control_point else 0.0,
                acceptable=ans.acceptable_fraction,
            )
        out.append(asset)
    return tuple(out)


_AUDIT_TYPES = {1: "Type 1 (walkthrough)", 2: "Type 2 (standard)", 3: "Type 3 (investment grade)"}


def audit_intake_report(config: SiteConfig, answers: Sequence[AuditAnswers]) -> str:
    """Plain-text intake checklist, one block per asset in asset-id order."""
    by_asset = {a.asset_id: a for a in answers}
    lines = [f"Flexibility audit intake: {config.site_name}",
             f"floor area: {config.floor_area_m2:g} m2",
             f"assets: {len(config.assets)}", ""]
    missing: list[str] = []
    candidates: list[str] = []
    for asset in sorted(config.assets, key=lambda a: a.id):
        ans = by_asset.get(asset.id)
        lines.append(f"[{asset.id}] {asset.name} ({asset.kind.value}, {asset.rated_power_kw:g} kW)")
        if asset.kind is not AssetKind.LOAD:
            lines.append("  outcome: enters matrix at rating (no S/C/A screen)")
            candidates.append(f"{asset.id} ({asset.name})")
        elif ans is None:
            lines.append("  outcome: UNCLASSIFIED - no audit answers")
            missing.append(f"{asset.id}: audit answers")
        else:
            cls = classify_load(ans)
            lines.append(f"  audit coverage: {_AUDIT_TYPES.get(ans.audit_type, ans.audit_type)}")
            S = ans.shed_fraction if ans.is_sheddable else 0.0
            C = ans.controllable_fraction if ans.has_control_point else 0.0
            F = flexibility_fraction(S, C, ans.acceptable_fraction)
            lines.append(f"  S={S:g} C={C:g} A={ans.acceptable_fraction:g} -> F={F:g}")
            lines.append(f"  outcome: {cls.value}")
            if cls is not LoadClass.INFLEXIBLE:
                candidates.append(f"{asset.id} ({asset.name})")
                absent = [f for f in ESTIMATE_FIELDS if f not in ans.parameter_estimates]
                if absent:
                    lines.append("  defaults used for: " + ", ".join(absent))
        lines.append("")
    products = list(config.products) or [Product(p) for p in config.matrix.products()]
    lines.append("flexibility candidates:")
    lines.extend(f"  - {c}" for c in candidates)
    if not candidates:
        lines.append("  (none)")
    if missing:
        lines.append("missing:")
        lines.extend(f"  - {m}" for m in missing)
    if products and not missing:
        try:
            _, _, notes = _characterize(config.assets, answers, products)
        except (MissingEstimate, ConfigError) as exc:
            lines.append("missing:")
            lines.append(f"  - {exc}")
        else:
            if notes:
                lines.append("defaults applied:")
                lines.extend(f"  - {n}" for n in notes)
    return "\n".join(lines).rstrip("\n") + "\n"


def answers_from_json(d: Any) -> list[AuditAnswers]:
    """Parse the audit answers document: a JSON list of per-asset objects."""
    if isinstance(d, Mapping) and "answers" in d:
        d = d["answers"]
    if not isinstance(d, list):
        raise ConfigError("answers: expected a JSON list")
    out = []
    for i, a in enumerate(d):
        where = f"answers[{i}]"
        if not isinstance(a, Mapping) or not isinstance(a.get("asset_id"), str):
            raise ConfigError(f"{where}: expected an object with asset_id")
        try:
            action = ShiftOrCurtail(a.get("shift_or_curtail", "none"))
        except ValueError:
            raise ConfigError(f"{where}.shift_or_curtail: {a.get('shift_or_curtail')!r} "
                              "is not one of shift, curtail, disconnect, none") from None
        audit_type = a.get("audit_type", 1)
        if audit_type not in (1, 2, 3):
            raise ConfigError(f"{where}.audit_type: must be 1, 2 or 3")
        fractions = {}
        for key in ("shed_fraction", "controllable_fraction", "acceptable_fraction"):
            v = a.get(key, 0.0)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not 0 <= v <= 1:
                raise ConfigError(f"{where}.{key}: must be a number in [0, 1]")
            fractions[key] = float(v)
        sheddable = bool(a.get("is_sheddable", False))
        if not sheddable and fractions["shed_fraction"] != 0:
            raise ConfigError(f"{where}.shed_fraction: must be 0 when is_sheddable is false")
        estimates = a.get("parameter_estimates", {}) or {}
        if not isinstance(estimates, Mapping):
            raise ConfigError(f"{where}.parameter_estimates: expected an object")
        unknown = set(estimates) - set(ESTIMATE_FIELDS)
        if unknown:
            raise ConfigError(f"{where}.parameter_estimates: unknown fields {sorted(unknown)}")
        out.append(AuditAnswers(
            asset_id=a["asset_id"],
            audit_type=audit_type,
            is_sheddable=sheddable,
            shed_fraction=fractions["shed_fraction"],
            has_control_point=bool(a.get("has_control_point", False)),
            controllable_fraction=fractions["controllable_fraction"],
            acceptable_fraction=fractions["acceptable_fraction"],
            shift_or_curtail=action,
            rebound_expected=bool(a.get("rebound_expected", False)),
            parameter_estimates=dict(estimates),
        ))
    return out
