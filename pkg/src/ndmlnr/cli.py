"""Command-line entry point.

Exit codes: 0 success, 1 invalid scenario (or a trace/report mismatch for
``verify``), 2 file I/O failure.
"""

from __future__ import annotations

import argparse
import contextlib
import json
import sys
from typing import Iterable, Optional

from . import trace as tr
from .engine import run
from .report import RunReport, report_from_trace
from .scenario import ScenarioError, bundled, load_document, parse_scenario
from .stability import ConfigurationError

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_IO = 2


def _fmt(v) -> str:
    return f"{float(v):g}"


def example_summary(records: Iterable[tr.TraceRecord]) -> str:
    """Human-readable walk through a discovery round, rebuilt from its trace."""
    records = list(records)
    start = next(r for r in records if r.event == "RUN_START").detail
    disc = next(r for r in records if r.event == "DISCOVERY_START").detail
    lines = [
        f"Source {disc['sa']} -> destination {disc['da']}, LSD threshold {_fmt(start['lsd_threshold'])}, "
        f"wait period {_fmt(start['wait_period'])} s",
        "",
        "NIT selections:",
    ]
    for r in records:
        if r.event == "NIT_SELECT":
            d = r.detail
            lines.append(f"  t={r.time:g} node {r.node}: {d['table']} -> selected lsd={_fmt(d['lsd'])} "
                         f"hops={d['hops']} bw={_fmt(d['bw'])} from node {d['prev']}")
    lines += ["", f"Candidate paths at node {disc['da']}:"]
    for r in records:
        if r.event == "CANDIDATE":
            lines.append(f"  {r.detail['path']} bw={_fmt(r.detail['bw'])}")
    lines += ["", "Node-disjoint selection:"]
    for r in records:
        if r.event == "PATH_ACCEPT":
            lines.append(f"  accepted {r.detail['path']} bw={_fmt(r.detail['bw'])}")
        elif r.event == "PATH_REJECT":
            lines.append(f"  rejected {r.detail['path']} bw={_fmt(r.detail['bw'])} "
                         f"(shares node {r.detail['shares']})")
    lines += ["", f"Installed at node {disc['sa']}:"]
    for r in records:
        if r.event == "ROUTE_INSTALL":
            lines.append(f"  {r.detail['path']} bw={_fmt(r.detail['bw'])} {r.detail['status']}")
    return "\n".join(lines) + "\n"


def _load(path: str):
    """Return (scenario, exit code); prints diagnostics on failure."""
    try:
        doc = load_document(path)
    except OSError as exc:
        print(f"error: cannot read {path}: {exc.strerror or exc}", file=sys.stderr)
        return None, EXIT_IO
    except ScenarioError as exc:
        _print_errors(exc.errors)
        return None, EXIT_INVALID
    try:
        return parse_scenario(doc), EXIT_OK
    except ScenarioError as exc:
        _print_errors(exc.errors)
        return None, EXIT_INVALID


def _print_errors(errors: list[str]) -> None:
    print(f"invalid scenario ({len(errors)} problem{'s' if len(errors) != 1 else ''}):", file=sys.stderr)
    for e in errors:
        print(f"  - {e}", file=sys.stderr)


def cmd_run(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    with contextlib.ExitStack() as stack:
        try:
            trace_out = stack.enter_context(open(args.trace, "w")) if args.trace and args.trace != "-" else sys.stdout
            report_out = stack.enter_context(open(args.report, "w")) if args.report else None
        except OSError as exc:
            print(f"error: cannot write output: {exc}", file=sys.stderr)
            return EXIT_IO
        try:
            records, report = run(scenario, seed=args.seed)
        except ConfigurationError as exc:
            _print_errors([str(exc)])
            return EXIT_INVALID
        try:
            trace_out.write(tr.dumps(records))
            if report_out is not None:
                report_out.write(report.to_json())
        except OSError as exc:
            print(f"error: write failed: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def cmd_example(args) -> int:
    records, _ = run(bundled("figure4"))
    sys.stdout.write(example_summary(records))
    return EXIT_OK


def cmd_validate(args) -> int:
    scenario, code = _load(args.scenario)
    if scenario is None:
        return code
    print("OK")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        records = tr.read_trace(args.trace)
        with open(args.report) as fh:
            stored = RunReport.from_dict(json.load(fh))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    recomputed = report_from_trace(records)
    if recomputed.to_dict() != stored.to_dict():
        print("MISMATCH: report is not reproducible from the trace", file=sys.stderr)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndmlnr", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="validate and run a scenario file")
    p.add_argument("scenario")
    p.add_argument("--trace", help="trace output path (JSON lines; default: stdout)")
    p.add_argument("--report", help="run report output path (JSON)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("example", help="run the built-in worked example and summarize it")
    p.set_defaults(func=cmd_example)

    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("verify", help="check that a report is recomputable from its trace")
    p.add_argument("trace")
    p.add_argument("report")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
