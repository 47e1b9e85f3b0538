"""Site assessment: stacked-source flexibility percentages per event scenario,
benchmark comparison and the KPI label.

Percentages are delivered flexibility over total site load at each step.  A
scenario's headline figure is the best step in the window ("up to N %"); the
time-average over the window is reported alongside it.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from flexgrid.flexmodel import (
    WEEKDAYS,
    AssessmentEvent,
    Direction,
    FlexEventRequest,
    FlexibilityMatrix,
    Season,
    SiteConfig,
    StackLayer,
)
from flexgrid.schedule import build_event_impact, max_peak_power_schedule


class MissingAsset(KeyError):
    pass


ASSESSMENT_NOTICE_H = 24.0
DEFAULT_DURATIONS = (1.0, 4.0)


def whole_percent(x: float) -> int:
    """Round half up to a whole percent."""
    return int(math.floor(x + 0.5 + 1e-9))


def fmt_percent(x: float) -> str:
    return f"{whole_percent(x)}%"


@dataclass(frozen=True)
class ScenarioSpec:
    duration_h: float
    season: Season
    source_stack: tuple[StackLayer | str, ...]
    window_start: datetime
    product_id: str | None = None
    notice_h: float = ASSESSMENT_NOTICE_H


@dataclass(eq=False)
class PrefixResult:
    label: str
    asset_ids: tuple[str, ...]
    delivered_kw: np.ndarray
    percent: np.ndarray
    clamped: bool
    rebound_kwh: float
    step_h: float

    @property
    def peak_percent(self) -> float:
        return float(self.percent.max()) if len(self.percent) else 0.0

    @property
    def mean_percent(self) -> float:
        return float(self.percent.mean()) if len(self.percent) else 0.0

    @property
    def delivered_kwh(self) -> float:
        return float(self.delivered_kw.sum() * self.step_h)

    @property
    def net_kwh(self) -> float:
        return self.delivered_kwh - self.rebound_kwh


@dataclass(eq=False)
class ScenarioResult:
    spec: ScenarioSpec
    timesteps: list[int]
    timestamps: list[datetime]
    total_load_kw: np.ndarray
    prefixes: list[PrefixResult]

    @property
    def key(self) -> tuple[str, float]:
        return self.spec.season.value, self.spec.duration_h


@dataclass(frozen=True)
class Comparison:
    benchmark: str
    label: str  # text as printed in the benchmark table
    low: float
    high: float
    site_label: str
    site_value: float

    @property
    def verdict(self) -> str:
        v = whole_percent(self.site_value)
        if v < self.low:
            return "below"
        if v > self.high:
            return "above"
        return "within"


@dataclass(frozen=True)
class BenchmarkTable:
    rows: tuple[tuple[str, str, str, str], ...]
    comparisons: tuple[Comparison, ...]
    verdicts: tuple[str, ...]

    HEADER = ("Benchmark 1", "Benchmark 2", "Site Flexibility (%)", "Duration (h)")

    def to_text(self) -> str:
        lines = ["BENCHMARK COMPARISON", "\t".join(self.HEADER)]
        lines.extend("\t".join(r) for r in self.rows)
        lines.append("")
        for c in self.comparisons:
            lines.append(f"{c.benchmark} {c.label} vs site {c.site_label} "
                         f"{fmt_percent(c.site_value)}: {c.verdict}")
        lines.extend(f"verdict: {v}" for v in self.verdicts)
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        w.writerows(self.rows)
        return buf.getvalue()


@dataclass(eq=False)
class AssessmentReport:
    site_name: str
    primary_season: Season
    scenarios: list[ScenarioResult]
    benchmark: BenchmarkTable | None = None
    kpi: dict = field(default_factory=dict)

    def scenario(self, season: Season, duration_h: float) -> ScenarioResult | None:
        for s in self.scenarios:
            if s.spec.season is season and abs(s.spec.duration_h - duration_h) < 1e-9:
                return s
        return None

    def headline(self, season: Season, duration_h: float) -> dict[str, float]:
        """Stack label -> best-step percentage for one scenario."""
        s = self.scenario(season, duration_h)
        return {} if s is None else {p.label: p.peak_percent for p in s.prefixes}

    def range_scenarios(self) -> list[ScenarioResult]:
        primary = [s for s in self.scenarios if s.spec.season is self.primary_season]
        return primary or list(self.scenarios)

    def site_range(self) -> tuple[float, float]:
        """(min, max) headline percentage over the range scenarios."""
        values = [p.peak_percent for s in self.range_scenarios() for p in s.prefixes]
        return (min(values), max(values)) if values else (0.0, 0.0)

    def duration_range(self, duration_h: float) -> tuple[float, float]:
        values = [p.peak_percent for s in self.range_scenarios()
                  if abs(s.spec.duration_h - duration_h) < 1e-9 for p in s.prefixes]
        return (min(values), max(values)) if values else (0.0, 0.0)


# --------------------------------------------------------------------------
# scenarios

def _layers(stack: Sequence[StackLayer | str]) -> list[StackLayer]:
    """Bare asset ids become single-asset layers labelled by the id."""
    return [s if isinstance(s, StackLayer) else StackLayer(s, (s,)) for s in stack]


def _resolve_stack(config: SiteConfig, stack: Sequence[StackLayer | str]):
    ids = set(config.asset_ids())
    for layer in _layers(stack):
        for aid in layer.asset_ids:
            if aid not in ids:
                raise MissingAsset(aid)


def event_flexibility_percent(config: SiteConfig, spec: ScenarioSpec) -> ScenarioResult:
    """Per-step flexibility percentage for every cumulative prefix of the stack.

    Each step is solved on its own with the peak-power objective, so the
    figure is the most the prefix can deliver at that step.
    """
    if not spec.source_stack:
        raise ValueError("source stack is empty")
    _resolve_stack(config, spec.source_stack)
    product = spec.product_id or _default_product(config)
    event = FlexEventRequest(product, spec.window_start, spec.duration_h,
                             Direction.DECREASE, 0.0, spec.notice_h)
    table = build_event_impact(config, event, spec.season)
    total = config.total_load.array()[table.timesteps]
    stamps = [config.total_load.timestamp(t) for t in table.timesteps]

    prefixes = []
    members: list[str] = []
    for layer in _layers(spec.source_stack):
        members.extend(layer.asset_ids)
        sub = table.restrict(members)
        delivered = np.zeros(table.n_steps)
        active: set[str] = set()
        for i in range(table.n_steps):
            sched = max_peak_power_schedule(sub.step_slice(i))
            delivered[i] = sched.power_trace_kw[0]
            active.update(r for r, on in zip(sched.resources, sched.activation[0]) if on)
        with np.errstate(divide="ignore", invalid="ignore"):
            pct = np.where(total > 0, 100.0 * delivered / total,
                           np.where(delivered > 0, np.inf, 0.0))
        clamped = bool(np.any(pct > 100.0))
        pct = np.minimum(pct, 100.0)
        rebound = sum(row.rebound.power_kw * row.rebound.duration_h
                      for row, rid in zip(sub.rows, sub.resources)
                      if rid in active and row is not None and row.rebound is not None)
        label = layer.label if not prefixes else f"+{layer.label}"
        prefixes.append(PrefixResult(label, tuple(members), delivered, pct, clamped,
                                     float(rebound), table.step_h))
    return ScenarioResult(spec, list(table.timesteps), stamps, total, prefixes)


def _default_product(config: SiteConfig) -> str:
    if config.products:
        return config.products[0].product_id
    products = config.matrix.products()
    return products[0] if products else "dr"


def default_events(config: SiteConfig) -> list[AssessmentEvent]:
    """1 h and 4 h windows starting at the peak-load step (shifted to fit)."""
    prof = config.total_load
    peak = int(np.argmax(prof.array())) if len(prof) else 0
    out = []
    for d in DEFAULT_DURATIONS:
        n = int(round(d * 60 / prof.step_minutes))
        if n > len(prof):
            continue
        start = min(peak, len(prof) - n)
        out.append(AssessmentEvent(d, prof.timestamp(start)))
    return out


def scenario_matrix(config: SiteConfig, seasons: Sequence[Season] | None = None) -> AssessmentReport:
    """Run every (event duration, season) cell over the configured stack."""
    primary = config.total_load.season
    if seasons is None:
        seasons = [primary] + [s for s in (Season.WINTER, Season.SUMMER) if s is not primary]
    _resolve_stack(config, config.stack)
    events = list(config.assessment_events) or default_events(config)
    scenarios = []
    if config.stack:
        for ev in sorted(events, key=lambda e: e.duration_h):
            for season in seasons:
                spec = ScenarioSpec(ev.duration_h, season, tuple(config.stack), ev.window_start)
                scenarios.append(event_flexibility_percent(config, spec))
    report = AssessmentReport(config.site_name, primary, scenarios)
    report.benchmark = benchmark_compare(report)
    report.kpi = kpi_fields(report, config.matrix)
    return report


# --------------------------------------------------------------------------
# benchmarks

BENCHMARK_1 = "Benchmark 1"
BENCHMARK_2 = "Benchmark 2"


def benchmark_compare(report: AssessmentReport) -> BenchmarkTable:
    """Compare the site against the two published demonstration benchmarks.

    Ranges are closed; an approximate figure (``~7 %``) is read as +-1 point,
    the precision percentages are reported at.
    """
    lo4, hi4 = report.duration_range(4.0)
    _, hi1 = report.duration_range(1.0)
    rows = (
        ("Avg 7 - 9%", "Min ~ 7%", f"{fmt_percent(lo4)} - {fmt_percent(hi4)}", "4 h"),
        ("Max 28 - 56%", "Max ~18%", f"Max {fmt_percent(hi1)}", "1 h"),
    )
    comparisons = (
        Comparison(BENCHMARK_1, "Avg 7 - 9%", 7, 9, "4 h min", lo4),
        Comparison(BENCHMARK_1, "Avg 7 - 9%", 7, 9, "4 h max", hi4),
        Comparison(BENCHMARK_2, "Min ~ 7%", 6, 8, "4 h min", lo4),
        Comparison(BENCHMARK_1, "Max 28 - 56%", 28, 56, "1 h max", hi1),
        Comparison(BENCHMARK_2, "Max ~18%", 17, 19, "1 h max", hi1),
    )
    verdicts = []
    if comparisons[1].verdict == "above":
        verdicts.append("greater than average flexibility")
    largest = comparisons[3]
    if largest.verdict == "within":
        verdicts.append("within the largest maximum range")
    elif largest.verdict == "above":
        verdicts.append("above the largest maximum range")
    else:
        verdicts.append("below the largest maximum range")
    return BenchmarkTable(rows, comparisons, tuple(verdicts))


# --------------------------------------------------------------------------
# KPI label

def _fmt_h(x: float) -> str:
    return f"{x:g} h"


def _availability_summary(matrix: FlexibilityMatrix) -> str:
    groups: dict[str, list[str]] = {}
    for row in matrix.rows:
        if row.availability is None or row.availability.total_hours() >= 7 * 24 - 1e-9:
            text = "24/7"
        else:
            parts = []
            days = row.availability.windows
            d = 0
            while d < 7:
                e = d
                while e + 1 < 7 and days[e + 1] == days[d]:
                    e += 1
                if days[d]:
                    span = ", ".join(f"{lo:05.2f}-{hi:05.2f}".replace(".", ":") for lo, hi in days[d])
                    name = WEEKDAYS[d].title() if d == e else f"{WEEKDAYS[d].title()}-{WEEKDAYS[e].title()}"
                    parts.append(f"{name} {span}")
                d = e + 1
            text = "; ".join(parts) or "never"
        ids = groups.setdefault(text, [])
        if row.asset_id not in ids:
            ids.append(row.asset_id)
    return "; ".join(f"{', '.join(sorted(v))}: {k}" for k, v in sorted(groups.items()))


def kpi_fields(report: AssessmentReport, matrix: FlexibilityMatrix) -> dict:
    lo, hi = report.site_range()
    if not matrix.rows:
        lo = hi = 0.0
    durations = sorted({s.spec.duration_h for s in report.range_scenarios()
                        if any(p.peak_percent > 0 for p in s.prefixes)})
    max_kw = max((float(p.delivered_kw.max()) for s in report.scenarios for p in s.prefixes
                  if len(p.delivered_kw)), default=0.0)
    tias = [r.tia_notice_h for r in matrix.rows]
    bench = report.benchmark or benchmark_compare(report)
    return {
        "site": report.site_name,
        "season": report.primary_season.value,
        "min_percent": whole_percent(lo),
        "max_percent": whole_percent(hi),
        "range": f"{fmt_percent(lo)}–{fmt_percent(hi)}",
        "durations_h": durations,
        "max_power_kw": round(max_kw, 1),
        "tia_min_h": min(tias) if tias else None,
        "tia_max_h": max(tias) if tias else None,
        "availability": _availability_summary(matrix) if matrix.rows else "",
        "benchmark": "; ".join(bench.verdicts),
        "note": "" if matrix.rows else "no flexible assets",
    }


@dataclass(frozen=True)
class KpiLabel:
    fields: dict
    text: str
    svg: str


def _label_lines(f: dict) -> list[tuple[str, str]]:
    tia = ("n/a" if f["tia_min_h"] is None else
           f"{_fmt_h(f['tia_min_h'])} (range {f['tia_min_h']:g}–{f['tia_max_h']:g} h)")
    durations = ", ".join(_fmt_h(d) for d in f["durations_h"]) or "none"
    lines = [
        ("Flexibility range", f["range"]),
        ("Event durations", durations),
        ("Max power", f"{f['max_power_kw']:g} kW"),
        ("Shortest notice (TIA)", tia),
        ("Availability", f["availability"] or "n/a"),
        ("Benchmark", f["benchmark"]),
    ]
    if f["note"]:
        lines.append(("Note", f["note"]))
    return lines


def kpi_label(report: AssessmentReport, matrix: FlexibilityMatrix) -> KpiLabel:
    """Render the KPI label as plain text and as a static, fixed-size SVG."""
    f = kpi_fields(report, matrix)
    lines = _label_lines(f)
    text = "\n".join([f"FLEXIBILITY KPI LABEL - {f['site']}",
                      *(f"{k.lower()}: {v}" for k, v in lines)]) + "\n"
    return KpiLabel(f, text, _label_svg(f, lines))


def _wrap(s: str, width: int) -> list[str]:
    words, out, cur = s.split(" "), [], ""
    for w in words:
        if cur and len(cur) + 1 + len(w) > width:
            out.append(cur)
            cur = w
        else:
            cur = f"{cur} {w}" if cur else w
    if cur:
        out.append(cur)
    return out or [""]


SVG_W, SVG_H = 480, 360
SCALE_MAX = 60.0  # percent shown on the range bar


def _label_svg(f: dict, lines: list[tuple[str, str]]) -> str:
    font = 'font-family="Helvetica, Arial, sans-serif"'
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" '
        f'viewBox="0 0 {SVG_W} {SVG_H}">',
        f'<rect x="0" y="0" width="{SVG_W}" height="{SVG_H}" fill="#ffffff" stroke="#1b3a4b" stroke-width="4"/>',
        f'<rect x="0" y="0" width="{SVG_W}" height="44" fill="#1b3a4b"/>',
        f'<text x="16" y="29" {font} font-size="18" font-weight="bold" fill="#ffffff">'
        f'FLEXIBILITY KPI LABEL</text>',
        f'<text x="16" y="66" {font} font-size="12" fill="#333333">{escape(f["site"])}</text>',
        f'<text x="16" y="104" {font} font-size="30" font-weight="bold" fill="#1b7f3b">'
        f'{escape(f["range"])}</text>',
        f'<text x="200" y="104" {font} font-size="12" fill="#333333">of total site load '
        f'({escape(f["season"])})</text>',
    ]
    # range bar: 0..SCALE_MAX %, benchmark bands above, site range as a solid bar
    x0, x1, y = 16, SVG_W - 16, 122
    scale = (x1 - x0) / SCALE_MAX

    def px(p):
        return x0 + min(max(p, 0.0), SCALE_MAX) * scale

    out.append(f'<rect x="{x0}" y="{y}" width="{x1 - x0}" height="14" fill="#e6e6e6"/>')
    for lo, hi, colour in ((7, 9, "#9ecae1"), (28, 56, "#c6dbef")):
        out.append(f'<rect x="{px(lo):.1f}" y="{y}" width="{px(hi) - px(lo):.1f}" height="14" '
                   f'fill="{colour}"/>')
    lo, hi = f["min_percent"], f["max_percent"]
    out.append(f'<rect x="{px(lo):.1f}" y="{y + 3}" width="{max(px(hi) - px(lo), 2):.1f}" '
               f'height="8" fill="#1b7f3b"/>')
    for tick in range(0, int(SCALE_MAX) + 1, 10):
        out.append(f'<text x="{px(tick):.1f}" y="{y + 28}" {font} font-size="9" '
                   f'text-anchor="middle" fill="#666666">{tick}%</text>')
    yy = y + 52
    for key, value in lines[1:]:
        wrapped = _wrap(value, 48)
        out.append(f'<text x="16" y="{yy}" {font} font-size="12" font-weight="bold" '
                   f'fill="#1b3a4b">{escape(key)}</text>')
        for k, part in enumerate(wrapped[:3]):
            out.append(f'<text x="170" y="{yy + 15 * k}" {font} font-size="12" '
                       f'fill="#222222">{escape(part)}</text>')
        yy += 15 * min(len(wrapped), 3) + 8
    out.append("</svg>")
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------
# export

def report_rows(report: AssessmentReport) -> list[dict]:
    rows = []
    for s in report.scenarios:
        for p in s.prefixes:
            for i, t in enumerate(s.timesteps):
                rows.append({
                    "season": s.spec.season.value,
                    "duration_h": s.spec.duration_h,
                    "prefix": p.label,
                    "timestep": t,
                    "timestamp": s.timestamps[i].isoformat(),
                    "total_load_kw": round(float(s.total_load_kw[i]), 6),
                    "delivered_kw": round(float(p.delivered_kw[i]), 6),
                    "percent": round(float(p.percent[i]), 6),
                })
    return rows


def report_to_csv(report: AssessmentReport) -> str:
    buf = io.StringIO()
    fields = ["season", "duration_h", "prefix", "timestep", "timestamp",
              "total_load_kw", "delivered_kw", "percent"]
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    w.writerows(report_rows(report))
    return buf.getvalue()


def report_summary(report: AssessmentReport) -> dict:
    scenarios = []
    for s in report.scenarios:
        scenarios.append({
            "season": s.spec.season.value,
            "duration_h": s.spec.duration_h,
            "window_start": s.spec.window_start.isoformat(),
            "prefixes": [{
                "label": p.label,
                "assets": list(p.asset_ids),
                "peak_percent": round(p.peak_percent, 6),
                "mean_percent": round(p.mean_percent, 6),
                "headline": fmt_percent(p.peak_percent),
                "delivered_kwh": round(p.delivered_kwh, 6),
                "rebound_kwh": round(p.rebound_kwh, 6),
                "net_kwh": round(p.net_kwh, 6),
                "clamped": p.clamped,
            } for p in s.prefixes],
        })
    bench = report.benchmark
    return {
        "site": report.site_name,
        "primary_season": report.primary_season.value,
        "scenarios": scenarios,
        "benchmark": None if bench is None else {
            "rows": [list(r) for r in bench.rows],
            "comparisons": [{"benchmark": c.benchmark, "range": c.label, "site": c.site_label,
                             "site_percent": whole_percent(c.site_value), "verdict": c.verdict}
                            for c in bench.comparisons],
            "verdicts": list(bench.verdicts),
        },
        "kpi": report.kpi,
    }
