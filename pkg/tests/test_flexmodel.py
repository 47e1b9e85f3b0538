import dataclasses
import json
import math
from datetime import datetime

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexgrid.flexmodel import (
    AssetKind,
    Availability,
    ConfigError,
    FlexAsset,
    FlexEventRequest,
    FlexibilityMatrix,
    FlexibilityParameters,
    IndexOutOfRange,
    LoadProfile,
    Season,
    SiteConfig,
    event_from_json,
    event_to_json,
    load_json,
    read_profile_csv,
    site_from_json,
    site_to_json,
    total_load_at,
    validate_site,
    write_profile_csv,
)

START = datetime(2016, 1, 20)


def tiny_site(values=(100.0, 120.0, 140.0)):
    return SiteConfig(
        "tiny", 50.0,
        (FlexAsset("bat", "Battery", AssetKind.STORAGE, 10.0, None, 20.0, 0.9),),
        FlexibilityMatrix((FlexibilityParameters("bat", "dr", 10.0, 1.0),)),
        LoadProfile(START, 15, tuple(values)),
    )


def test_reference_site_is_valid(reference):
    assert validate_site(reference) == []


def test_reference_peak_near_140(reference):
    peak = max(total_load_at(reference, t) for t in range(len(reference.total_load)))
    assert peak == pytest.approx(140.0, abs=1.0)


def test_total_load_lookup():
    cfg = tiny_site()
    assert total_load_at(cfg, 2) == 140.0
    with pytest.raises(IndexOutOfRange):
        total_load_at(cfg, 3)


def test_unknown_asset_reported():
    cfg = tiny_site()
    bad = dataclasses.replace(cfg, matrix=FlexibilityMatrix(
        cfg.matrix.rows + (FlexibilityParameters("b99", "dr", 1.0, 1.0),)))
    problems = validate_site(bad)
    assert [(v.kind, v.field) for v in problems] == [("UnknownAsset", "b99")]


def test_range_violation_on_sheddable():
    cfg = tiny_site()
    load = FlexAsset("ahu", "AHU", AssetKind.LOAD, 5.0, None, sheddable=1.2)
    from flexgrid.flexmodel import LoadClass
    load = dataclasses.replace(load, load_class=LoadClass.SHIFTABLE_PROFILE)
    problems = validate_site(dataclasses.replace(cfg, assets=cfg.assets + (load,)))
    assert [(v.kind, v.field) for v in problems] == [("RangeViolation", "assets[1].sheddable")]


@pytest.mark.parametrize("mutate, field", [
    (lambda c: dataclasses.replace(c, floor_area_m2=0.0), "floor_area_m2"),
    (lambda c: dataclasses.replace(c, total_load=LoadProfile(START, 7, (1.0,))),
     "total_load.step_minutes"),
    (lambda c: dataclasses.replace(c, total_load=LoadProfile(START, 15, (1.0, -2.0))),
     "total_load.values_kw[1]"),
    (lambda c: dataclasses.replace(c, matrix=FlexibilityMatrix(
        (FlexibilityParameters("bat", "dr", 11.0, 1.0),))), "matrix[0].flexible_power_kw"),
    (lambda c: dataclasses.replace(c, matrix=FlexibilityMatrix(c.matrix.rows * 2)), "matrix[1]"),
    (lambda c: dataclasses.replace(c, matrix=FlexibilityMatrix((FlexibilityParameters(
        "bat", "dr", 1.0, 1.0, availability=Availability(
            (((8.0, 12.0), (11.0, 13.0)),) + ((),) * 6)),))), "matrix[0].availability.mon"),
    (lambda c: dataclasses.replace(c, assets=(dataclasses.replace(
        c.assets[0], energy_capacity_kwh=None),)), "assets[0].energy_capacity_kwh"),
])
def test_single_broken_invariant_is_named(mutate, field):
    problems = validate_site(mutate(tiny_site()))
    assert field in [v.field for v in problems]


def test_site_json_round_trip(reference):
    again = site_from_json(json.loads(json.dumps(site_to_json(reference))))
    assert again == reference


def test_site_profile_from_csv(tmp_path):
    prof = LoadProfile(START, 30, (10.0, 12.5, 9.0))
    write_profile_csv(prof, tmp_path / "load.csv")
    assert (tmp_path / "load.csv").read_text().splitlines()[:2] == [
        "timestamp,load_kw", "2016-01-20T00:00:00,10.0"]
    assert read_profile_csv(tmp_path / "load.csv") == prof
    doc = site_to_json(tiny_site())
    doc["total_load"] = {"csv": "load.csv"}
    cfg = site_from_json(doc, tmp_path)
    assert cfg.total_load == prof


def test_profile_csv_rejects_gaps(tmp_path):
    p = tmp_path / "gap.csv"
    p.write_text("timestamp,load_kw\n2016-01-20T00:00,1\n2016-01-20T00:15,2\n"
                 "2016-01-20T00:45,3\n")
    with pytest.raises(ConfigError, match=":4:"):
        read_profile_csv(p)


def test_malformed_json_names_byte_offset(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"site_name": "x",\n "assets": [1, 2,]}')
    with pytest.raises(ConfigError, match=r"bad.json:2:.*byte offset 36"):
        load_json(p)


def test_availability_permits_whole_step():
    av = Availability(tuple(((7.0, 19.0),) if d < 5 else () for d in range(7)))
    assert av.permits(datetime(2016, 1, 20, 7, 0), 15)
    assert av.permits(datetime(2016, 1, 20, 18, 45), 15)
    assert not av.permits(datetime(2016, 1, 20, 18, 50), 15)
    assert not av.permits(datetime(2016, 1, 23, 10, 0), 15)  # Saturday
    assert av.total_hours() == 60.0


def test_resample_down_and_up():
    prof = LoadProfile(START, 15, (1.0, 3.0, 5.0, 7.0))
    assert prof.resample(30).values_kw == (2.0, 6.0)
    assert prof.resample(5).values_kw[:4] == (1.0, 1.0, 1.0, 3.0)
    with pytest.raises(ValueError):
        prof.resample(20)


def test_event_envelope_round_trip():
    ev = FlexEventRequest("dr", START, 1.0, min_power_kw=5.0, notice_given_h=2.0,
                          energy_weight=(1.0, 2.0, 1.0, 1.0))
    assert event_from_json(event_to_json(ev)) == ev
    with pytest.raises(ConfigError):
        event_from_json({"product": "dr"})


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 500, allow_nan=False), min_size=1, max_size=96),
       st.sampled_from([5, 15, 30, 60]), st.sampled_from(list(Season)))
def test_profile_round_trip_property(values, step, season):
    cfg = dataclasses.replace(tiny_site(), total_load=LoadProfile(START, step, tuple(values), season))
    again = site_from_json(json.loads(json.dumps(site_to_json(cfg))))
    assert again == cfg
    loads = [total_load_at(again, t) for t in range(len(values))]
    assert all(math.isfinite(v) and v >= 0 for v in loads)
    np.testing.assert_array_equal(again.total_load.array(), values)
