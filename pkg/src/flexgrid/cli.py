"""``flexgrid`` command line: characterize, schedule, assess.

Exit codes: 0 ok, 2 bad input, 3 I/O failure, 4 infeasible, 5 node cap hit.
Every run writes a ``manifest.json`` next to its outputs; nothing is written
outside ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from pathlib import Path
from typing import Sequence

from flexgrid import __version__
from flexgrid.assess import (
    MissingAsset,
    kpi_label,
    report_rows,
    report_summary,
    report_to_csv,
    scenario_matrix,
)
from flexgrid.characterize import (
    DomainError,
    MissingAnswers,
    MissingEstimate,
    _characterize,
    answers_from_json,
    audit_intake_report,
)
from flexgrid.flexmodel import (
    ConfigError,
    IndexOutOfRange,
    Season,
    SiteConfig,
    dump_json,
    event_from_json,
    load_json,
    matrix_to_json,
    site_from_json,
    validate_site,
)
from flexgrid.milp import DEFAULT_NODE_CAP, FEAS_TOL, INT_TOL, PIVOT_TOL, CapExceeded
from flexgrid.schedule import (
    EmptyWindow,
    InfeasibleSchedule,
    ProbabilityMass,
    UnknownProduct,
    build_event_impact,
    max_bid_duration_schedule,
    max_peak_power_schedule,
    max_revenue_schedule,
    program_from_json,
    schedule_summary,
    schedule_to_csv,
    stochastic_schedule,
)

log = logging.getLogger("flexgrid")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_IO = 3
EXIT_INFEASIBLE = 4
EXIT_CAP = 5


class InputError(Exception):
    pass


class OutputIOError(Exception):
    pass


class Run:
    """Collects outputs under one directory and writes the manifest last."""

    def __init__(self, command: str, out_dir: str, step_minutes: int):
        self.command = command
        self.out = Path(out_dir)
        self.step_minutes = step_minutes
        self.inputs: list[tuple[str, str]] = []
        self.outputs: dict[str, str] = {}
        try:
            self.out.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputIOError(f"cannot create output directory {out_dir}: {exc}") from None

    def read_input(self, path: str) -> bytes:
        try:
            data = Path(path).read_bytes()
        except OSError as exc:
            raise OutputIOError(f"cannot read {path}: {exc.strerror or exc}") from None
        self.inputs.append((path, hashlib.sha256(data).hexdigest()))
        return data

    def write(self, name: str, data: str | bytes) -> Path:
        if Path(name).is_absolute() or ".." in Path(name).parts:
            raise ValueError(f"output name {name!r} escapes the output directory")
        path = self.out / name
        raw = data.encode("utf-8") if isinstance(data, str) else data
        try:
            path.write_bytes(raw)
        except OSError as exc:
            raise OutputIOError(f"cannot write {path}: {exc}") from None
        self.outputs[name] = hashlib.sha256(raw).hexdigest()
        return path

    def register(self, name: str):
        """Record a file already written into the output directory."""
        self.outputs[name] = hashlib.sha256((self.out / name).read_bytes()).hexdigest()

    def finish(self):
        manifest = {
            "command": self.command,
            "tool_version": __version__,
            "inputs": [{"path": p, "sha256": h} for p, h in self.inputs],
            "timestep_minutes": self.step_minutes,
            "tolerances": {"pivot": PIVOT_TOL, "feasibility": FEAS_TOL, "integrality": INT_TOL},
            "outputs": [{"path": k, "sha256": v} for k, v in sorted(self.outputs.items())],
        }
        self.write("manifest.json", dump_json(manifest))


def _parse_json_input(run: Run, path: str):
    run.read_input(path)
    return load_json(path)


def _load_config(run: Run, path: str, step_minutes: int) -> SiteConfig:
    data = _parse_json_input(run, path)
    config = site_from_json(data, Path(path).parent)
    problems = validate_site(config)
    if problems:
        raise InputError("\n".join(f"{path}: {v.kind} at {v.field}: {v.detail}" for v in problems))
    try:
        return config.with_step(step_minutes)
    except ValueError as exc:
        raise InputError(f"--step-minutes {step_minutes}: {exc}") from None


# --------------------------------------------------------------------------
# commands

def cmd_characterize(args) -> int:
    run = Run("characterize", args.out, args.step_minutes)
    config = _load_config(run, args.site, args.step_minutes)
    answers = answers_from_json(_parse_json_input(run, args.answers))
    try:
        matrix, classes, notes = _characterize(config.assets, answers, config.products)
    except MissingAnswers as exc:
        raise InputError(f"{args.answers}: no audit answers for asset {exc.args[0]!r}") from None
    except MissingEstimate as exc:
        raise InputError(f"{args.answers}: asset {exc.args[0]!r} lacks estimate "
                         f"{exc.args[1]!r}") from None
    doc = {
        "site": config.site_name,
        "classes": {k: (v.value if v else None) for k, v in sorted(classes.items())},
        "matrix": matrix_to_json(matrix),
        "defaults_applied": list(notes),
    }
    run.write("matrix.json", dump_json(doc))
    run.write("intake_report.txt", audit_intake_report(config, answers))
    run.finish()
    print(f"flexible rows: {len(matrix.rows)}")
    for aid, cls in sorted(classes.items()):
        print(f"  {aid}: {cls.value if cls else 'non-load'}")
    return EXIT_OK


def cmd_schedule(args) -> int:
    run = Run(f"schedule --objective {args.objective}", args.out, args.step_minutes)
    config = _load_config(run, args.site, args.step_minutes)
    if not config.matrix.rows:
        raise InputError(f"{args.site}: site has no flexibility matrix")
    raw = _parse_json_input(run, args.event)
    event = event_from_json(raw)
    table = build_event_impact(config, event)
    cap = args.node_cap
    if args.objective == "revenue":
        sched = max_revenue_schedule(table, event.energy_weight, node_cap=cap)
    elif args.objective == "duration":
        sched = max_bid_duration_schedule(table, event.min_power_kw, args.contiguous, node_cap=cap)
    elif args.objective == "peak":
        sched = max_peak_power_schedule(table, node_cap=cap)
    else:
        if not isinstance(raw, dict) or "stochastic" not in raw:
            raise InputError(f"{args.event}: --objective stochastic needs a 'stochastic' block")
        program = program_from_json(raw["stochastic"], table.n_steps)
        sched = stochastic_schedule(program, table, node_cap=cap)

    summary = schedule_summary(sched, table)
    text = schedule_to_csv(sched, table)
    if args.format == "json":
        rows = list(csv.DictReader(io.StringIO(text)))
        run.write("schedule.json", dump_json(rows))
    else:
        run.write("schedule.csv", text)
    run.write("summary.json", dump_json(summary))
    run.finish()
    if args.objective == "duration":
        print(f"bid duration: {summary['duration_steps']} steps ({summary['duration_h']:g} h)")
    print(f"objective ({summary['objective_kind']}): {summary['objective_value']:.6f}")
    return EXIT_OK


def cmd_assess(args) -> int:
    # plotting pulls in matplotlib; keep it off the other commands' path
    from flexgrid.plotting import figure_name, plot_scenario

    run = Run(f"assess --season {args.season}", args.out, args.step_minutes)
    config = _load_config(run, args.site, args.step_minutes)
    seasons = None if args.season == "all" else [Season(args.season)]
    try:
        report = scenario_matrix(config, seasons)
    except MissingAsset as exc:
        raise InputError(f"{args.site}: stack names unknown asset {exc.args[0]!r}") from None
    label = kpi_label(report, config.matrix)

    if args.format == "json":
        run.write("assessment.json", dump_json(report_rows(report)))
    else:
        run.write("assessment.csv", report_to_csv(report))
    run.write("summary.json", dump_json(report_summary(report)))
    run.write("benchmark.csv", report.benchmark.to_csv())
    run.write("benchmark.txt", report.benchmark.to_text())
    run.write("kpi_label.svg", label.svg)
    run.write("kpi_label.txt", label.text)
    for s in report.scenarios:
        name = figure_name(s)
        plot_scenario(s, run.out / name)
        run.register(name)
    run.finish()

    print(f"site: {report.site_name}")
    for s in report.scenarios:
        cells = ", ".join(f"{p.label} {round(p.peak_percent)}%" for p in s.prefixes)
        print(f"{s.spec.season.value} {s.spec.duration_h:g} h: {cells}")
    for v in report.benchmark.verdicts:
        print(f"benchmark: {v}")
    print(f"flexibility range: {label.fields['range']}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flexgrid", description="Building flexibility toolkit.")
    p.add_argument("--version", action="version", version=f"flexgrid {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--step-minutes", type=int, default=15)
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    c = sub.add_parser("characterize", help="build the flexibility matrix from audit answers")
    c.add_argument("site")
    c.add_argument("answers")
    common(c)
    c.set_defaults(func=cmd_characterize)

    s = sub.add_parser("schedule", help="schedule flexible resources for one DR event")
    s.add_argument("site")
    s.add_argument("event")
    s.add_argument("--objective", required=True,
                   choices=("revenue", "duration", "peak", "stochastic"))
    s.add_argument("--node-cap", type=int, default=DEFAULT_NODE_CAP)
    s.add_argument("--contiguous", action="store_true",
                   help="bid steps must form one block (duration objective)")
    common(s)
    s.set_defaults(func=cmd_schedule)

    a = sub.add_parser("assess", help="scenario matrix, benchmark table and KPI label")
    a.add_argument("site")
    a.add_argument("--season", choices=("all", "winter", "summer"), default="all")
    common(a)
    a.set_defaults(func=cmd_assess)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("FLEXGRID_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.step_minutes <= 0:
        print("error: --step-minutes must be positive", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except OutputIOError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InputError, ConfigError, DomainError, UnknownProduct, EmptyWindow,
            ProbabilityMass, IndexOutOfRange, json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        if isinstance(exc, UnknownProduct):
            msg = f"unknown product {exc.args[0]!r}"
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT
    except InfeasibleSchedule as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CapExceeded as exc:
        print(f"node cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except KeyError as exc:
        print(f"error: unknown identifier {exc.args[0]!r}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
