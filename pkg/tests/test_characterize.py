import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexgrid.characterize import (
    AuditAnswers,
    DomainError,
    MissingAnswers,
    MissingEstimate,
    ShiftOrCurtail,
    answers_from_json,
    apply_answers,
    audit_intake_report,
    characterize_site,
    classify_load,
    flexibility_fraction,
    resource_potential,
)
from flexgrid.flexmodel import (
    AssetKind,
    ConfigError,
    FlexAsset,
    FlexibilityMatrix,
    LoadClass,
    Product,
    SiteConfig,
    load_json,
)
from flexgrid.reference import REFERENCE_ANSWERS

unit = st.floats(0.0, 1.0, allow_nan=False)
DR = Product("dr", 4.0)


def flexible(asset_id, **kw):
    base = dict(asset_id=asset_id, is_sheddable=True, shed_fraction=1.0, has_control_point=True,
                controllable_fraction=1.0, acceptable_fraction=1.0,
                shift_or_curtail=ShiftOrCurtail.CURTAIL)
    base.update(kw)
    return AuditAnswers(**base)


@pytest.mark.parametrize("S, C, A, F", [
    (0.0, 0.8, 0.5, 0.0),
    (1.0, 1.0, 1.0, 1.0),
    (1.0, 0.5, 0.3, 0.3),
    (0.5, 0.4, 0.9, 0.2),
])
def test_flexibility_fraction_examples(S, C, A, F):
    assert flexibility_fraction(S, C, A) == pytest.approx(F)


def test_resource_potential_example():
    assert resource_potential(0.26, 140.0) == pytest.approx(36.4)
    assert resource_potential(0.0, 140.0) == 0.0


@pytest.mark.parametrize("args", [(1.2, 0.5, 0.5), (0.5, -0.1, 0.5), (0.5, 0.5, math.nan)])
def test_fraction_domain(args):
    with pytest.raises(DomainError):
        flexibility_fraction(*args)


@pytest.mark.parametrize("F, L", [(1.5, 10.0), (0.5, -1.0), (0.5, math.inf)])
def test_potential_domain(F, L):
    with pytest.raises(DomainError):
        resource_potential(F, L)


@pytest.mark.parametrize("kw, cls", [
    ({"is_sheddable": False, "shed_fraction": 0.0}, LoadClass.INFLEXIBLE),
    ({"has_control_point": False}, LoadClass.INFLEXIBLE),
    ({"acceptable_fraction": 0.0}, LoadClass.INFLEXIBLE),
    ({"shift_or_curtail": ShiftOrCurtail.NONE}, LoadClass.INFLEXIBLE),
    ({"shift_or_curtail": ShiftOrCurtail.SHIFT, "rebound_expected": True},
     LoadClass.SHIFTABLE_PROFILE),
    ({"shift_or_curtail": ShiftOrCurtail.SHIFT}, LoadClass.SHIFTABLE_VOLUME),
    ({}, LoadClass.CURTAILABLE_REDUCIBLE),
    ({"shift_or_curtail": ShiftOrCurtail.DISCONNECT}, LoadClass.CURTAILABLE_DISCONNECTABLE),
])
def test_classify_load_table(kw, cls):
    assert classify_load(flexible("x", **kw)) is cls


def test_inflexible_load_eliminated():
    assets = [FlexAsset("ahu", "AHU", AssetKind.LOAD, 50.0)]
    ans = [flexible("ahu", has_control_point=False)]
    assert characterize_site(assets, ans, [DR]) == FlexibilityMatrix(())


def test_storage_enters_at_rating():
    assets = [FlexAsset("bat", "Battery", AssetKind.STORAGE, 36.0, None, 48.0, 0.9)]
    m = characterize_site(assets, [], [DR])
    assert [(r.asset_id, r.product_id, r.flexible_power_kw) for r in m.rows] == [("bat", "dr", 36.0)]


def test_hvac_fraction_of_rating():
    assets = [FlexAsset("ahu", "AHU", AssetKind.LOAD, 50.0)]
    m = characterize_site(assets, [flexible("ahu", acceptable_fraction=0.1)], [DR])
    assert m.rows[0].flexible_power_kw == pytest.approx(5.0)
    assert m.rows[0].max_duration_h == 4.0


def test_rows_sorted_by_asset_then_product():
    assets = [FlexAsset(i, i, AssetKind.LOAD, 10.0) for i in ("zz", "aa")]
    m = characterize_site(assets, [flexible("zz"), flexible("aa")], [DR, Product("ffr", 0.5)])
    assert [(r.asset_id, r.product_id) for r in m.rows] == [
        ("aa", "dr"), ("aa", "ffr"), ("zz", "dr"), ("zz", "ffr")]


def test_missing_answers_names_asset():
    assets = [FlexAsset("ahu", "AHU", AssetKind.LOAD, 50.0)]
    with pytest.raises(MissingAnswers) as info:
        characterize_site(assets, [], [DR])
    assert info.value.asset_id == "ahu"


def test_missing_duration_without_product_default():
    assets = [FlexAsset("ahu", "AHU", AssetKind.LOAD, 50.0)]
    with pytest.raises(MissingEstimate):
        characterize_site(assets, [flexible("ahu")], [Product("open")])


def test_apply_answers_copies_fractions():
    assets = (FlexAsset("ahu", "AHU", AssetKind.LOAD, 50.0),)
    (out,) = apply_answers(assets, [flexible("ahu", controllable_fraction=0.4)])
    assert (out.sheddable, out.controllable, out.acceptable) == (1.0, 0.4, 1.0)
    assert out.load_class is LoadClass.CURTAILABLE_REDUCIBLE


def test_answers_json_rejects_bad_fraction():
    with pytest.raises(ConfigError, match=r"answers\[0\].acceptable_fraction"):
        answers_from_json([{"asset_id": "a", "acceptable_fraction": 2}])


def test_reference_answers_characterize(reference):
    answers = answers_from_json(load_json(REFERENCE_ANSWERS))
    m = characterize_site(reference.assets, answers, reference.products)
    got = {r.asset_id: r.flexible_power_kw for r in m.rows if r.product_id == "dr"}
    assert "lighting" not in got
    assert got["ahu"] == pytest.approx(0.1 * next(a for a in reference.assets
                                                   if a.id == "ahu").rated_power_kw)


def test_intake_report_empty_site():
    cfg = SiteConfig("empty", 10.0, (), FlexibilityMatrix(()), None)
    text = audit_intake_report(cfg, [])
    assert text.startswith("Flexibility audit intake: empty\n")
    assert "(none)" in text and "missing:" not in text


def test_intake_report_lists_unanswered(reference):
    text = audit_intake_report(reference, [])
    assert "missing:" in text
    assert "  - ahu: audit answers" in text


def test_intake_report_reference_candidates(reference):
    text = audit_intake_report(reference, answers_from_json(load_json(REFERENCE_ANSWERS)))
    cands = text.split("flexibility candidates:\n")[1]
    assert "  - ahu (" in cands and "  - vrf (" in cands
    assert "lighting (" not in cands


@settings(max_examples=1000, deadline=None)
@given(unit, unit, unit)
def test_fraction_bounded_by_each_input(S, C, A):
    F = flexibility_fraction(S, C, A)
    assert 0.0 <= F <= min(S, C, A) + 1e-12


@settings(max_examples=1000, deadline=None)
@given(unit, unit, unit, unit, st.integers(0, 2))
def test_fraction_monotone(S, C, A, bump, which):
    args = [S, C, A]
    raised = list(args)
    raised[which] = max(args[which], bump)
    assert flexibility_fraction(*raised) >= flexibility_fraction(*args) - 1e-12


@settings(max_examples=1000, deadline=None)
@given(unit, st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 10))
def test_potential_linear_in_load(F, L1, L2, k):
    tol = 1e-9 * (1 + L1 + L2) * (1 + k)
    assert resource_potential(F, L1 + L2) == pytest.approx(
        resource_potential(F, L1) + resource_potential(F, L2), abs=tol)
    assert resource_potential(F, k * L1) == pytest.approx(k * resource_potential(F, L1), abs=tol)
