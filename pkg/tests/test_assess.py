import dataclasses

import pytest

from flexgrid.assess import (
    AssessmentReport,
    MissingAsset,
    ScenarioSpec,
    benchmark_compare,
    event_flexibility_percent,
    kpi_fields,
    kpi_label,
    report_to_csv,
    scenario_matrix,
    whole_percent,
)
from flexgrid.flexmodel import Availability, FlexibilityMatrix, Season, StackLayer

EXPECTED = {
    (Season.WINTER, 1.0): {"Battery": 26, "+PV": 29, "+HVAC": 32},
    (Season.WINTER, 4.0): {"Battery": 8, "+PV": 11, "+HVAC": 15},
    (Season.SUMMER, 1.0): {"+PV": 33},
    (Season.SUMMER, 4.0): {"+PV": 18},
}


@pytest.fixture(scope="module")
def report(reference):
    return scenario_matrix(reference)


def spec_for(config, duration, season=Season.WINTER, stack=None):
    ev = next(e for e in config.assessment_events if e.duration_h == duration)
    return ScenarioSpec(duration, season, tuple(stack or config.stack), ev.window_start)


@pytest.mark.parametrize("key", sorted(EXPECTED, key=lambda k: (k[0].value, k[1])))
def test_reference_scenarios(report, key):
    got = report.headline(*key)
    for label, pct in EXPECTED[key].items():
        assert abs(got[label] - pct) <= 1.0, (label, got[label])


def test_whole_percent_rounds_half_up():
    assert [whole_percent(x) for x in (7.49, 7.5, 8.0, 0.0)] == [7, 8, 8, 0]


def test_stacking_never_decreases(report):
    for s in report.scenarios:
        for a, b in zip(s.prefixes, s.prefixes[1:]):
            assert (b.delivered_kw >= a.delivered_kw - 1e-7).all()
            assert set(a.asset_ids) < set(b.asset_ids)


def test_battery_share_shrinks_with_duration(report):
    one = report.headline(Season.WINTER, 1.0)["Battery"]
    four = report.headline(Season.WINTER, 4.0)["Battery"]
    assert one >= four


def test_mean_not_above_peak(report):
    for s in report.scenarios:
        for p in s.prefixes:
            assert p.mean_percent <= p.peak_percent + 1e-9
            assert 0.0 <= p.peak_percent <= 100.0


def test_rebound_only_from_hvac(report):
    s = report.scenario(Season.WINTER, 1.0)
    assert s.prefixes[0].rebound_kwh == 0.0
    assert s.prefixes[2].rebound_kwh > 0.0
    assert s.prefixes[2].net_kwh < s.prefixes[2].delivered_kwh


def test_empty_availability_gives_zero(reference):
    closed = Availability(((),) * 7)
    rows = tuple(dataclasses.replace(r, availability=closed) for r in reference.matrix.rows)
    cfg = dataclasses.replace(reference, matrix=FlexibilityMatrix(rows))
    res = event_flexibility_percent(cfg, spec_for(cfg, 1.0))
    assert all(p.peak_percent == 0.0 for p in res.prefixes)


def test_unknown_stack_asset(reference):
    with pytest.raises(MissingAsset):
        event_flexibility_percent(reference, spec_for(reference, 1.0, stack=["battery", "chp"]))


def test_grouped_layer_label(reference):
    stack = ["battery", StackLayer("Rest", ("pv", "ahu", "vrf"))]
    res = event_flexibility_percent(reference, spec_for(reference, 1.0, stack=stack))
    assert [p.label for p in res.prefixes] == ["battery", "+Rest"]


def test_benchmark_rows_verbatim(report):
    rows = report.benchmark.rows
    assert rows[0][:2] == ("Avg 7 - 9%", "Min ~ 7%")
    assert rows[1][:2] == ("Max 28 - 56%", "Max ~18%")
    assert rows[0][2:] == ("8% - 15%", "4 h")
    assert rows[1][2:] == ("Max 32%", "1 h")
    assert "within the largest maximum range" in report.benchmark.verdicts
    assert report.benchmark.to_csv().splitlines()[0] == (
        "Benchmark 1,Benchmark 2,Site Flexibility (%),Duration (h)")


def _with_values(report, values):
    for s, v in zip(report.scenarios, values):
        for p in s.prefixes:
            p.percent = p.percent * 0 + v
    return report


def test_benchmark_all_zero_site(reference):
    rep = _with_values(scenario_matrix(reference, [Season.WINTER]), [0.0, 0.0])
    table = benchmark_compare(rep)
    assert {c.verdict for c in table.comparisons} == {"below"}
    assert table.verdicts == ("below the largest maximum range",)


def test_benchmark_seven_percent_within_average(reference):
    rep = _with_values(scenario_matrix(reference, [Season.WINTER]), [30.0, 7.0])
    verdicts = {(c.benchmark, c.site_label): c.verdict for c in benchmark_compare(rep).comparisons}
    assert verdicts[("Benchmark 1", "4 h min")] == "within"
    assert verdicts[("Benchmark 2", "4 h min")] == "within"


def test_kpi_range(report, reference):
    assert report.kpi["range"] == "8%–32%"
    assert kpi_label(report, reference.matrix).fields["range"] == "8%–32%"


def test_kpi_empty_matrix(reference):
    empty = AssessmentReport(reference.site_name, Season.WINTER, [])
    empty.benchmark = benchmark_compare(empty)
    f = kpi_fields(empty, FlexibilityMatrix(()))
    assert f["range"] == "0%–0%"
    assert "no flexible assets" in f["note"]


def test_kpi_label_svg_deterministic(reference):
    a = kpi_label(scenario_matrix(reference), reference.matrix)
    b = kpi_label(scenario_matrix(reference), reference.matrix)
    assert a.svg == b.svg and a.text == b.text
    assert "<svg xmlns=" in a.svg and "8%–32%" in a.svg
    assert "Helvetica, Arial, sans-serif" in a.svg


def test_report_csv_has_every_prefix_step(report):
    lines = report_to_csv(report).splitlines()
    assert len(lines) == 1 + sum(len(s.prefixes) * len(s.timesteps) for s in report.scenarios)
