"""Command line entry point.

Exit codes: 0 success, 1 validation findings (or differing streams for
``diff``), 2 runtime fault, 64 usage error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .building_blocks import builtin_registry
from .errors import ScenarioError, ScensimError
from .manager import check_runnable, load_scenario, plan_run, run_distributed, write_reference

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_FAULT = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="scensim", description="Run scenario documents as a co-simulation federation.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run the federation for a scenario")
    run.add_argument("scenario", type=Path)
    run.add_argument("--transport", choices=("inproc", "tcp"), default="inproc")
    run.add_argument("--out", type=Path, default=Path("scensim-out"))
    run.add_argument("--host", default="127.0.0.1")
    run.add_argument("--port", type=int, default=None, help="coordinator port for tcp (default: SCENSIM_RTI_ADDR or any free port)")
    run.add_argument("--startup-timeout", type=float, default=30.0)

    check = sub.add_parser("check", help="validate a scenario")
    check.add_argument("scenario", type=Path)

    fom = sub.add_parser("fom", help="write the generated FOM modules")
    fom.add_argument("scenario", type=Path)
    fom.add_argument("--out", type=Path, required=True)

    ref = sub.add_parser("reference", help="run the sequential reference executor")
    ref.add_argument("scenario", type=Path)
    ref.add_argument("--out", type=Path, required=True)

    diff = sub.add_parser("diff", help="compare two observer streams byte for byte")
    diff.add_argument("a", type=Path)
    diff.add_argument("b", type=Path)
    return parser


def _print_findings(exc: ScenarioError) -> None:
    findings = exc.findings or []
    if not findings:
        code = type(exc).__name__.removesuffix("Error")
        print(f"{code}: {exc}", file=sys.stderr)
    for f in findings:
        print(f"{f.code} at {f.path}: {f.message}", file=sys.stderr)


def _load(path: Path):
    registry = builtin_registry()
    return load_scenario(path, registry), registry


def cmd_check(args) -> int:
    scenario, _ = _load(args.scenario)
    report = check_runnable(scenario)
    if not report.ok:
        for f in report.findings:
            print(f"{f.code} at {f.path}: {f.message}", file=sys.stderr)
        return EXIT_FINDINGS
    print(f"{args.scenario}: ok ({len(scenario.simulation_objects)} objects, {len(scenario.observers)} observers)")
    return EXIT_OK


def cmd_fom(args) -> int:
    scenario, registry = _load(args.scenario)
    plan = plan_run(scenario, registry, args.out)
    for name in sorted(plan.fom_documents):
        print(args.out / "fom" / name)
    return EXIT_OK


def cmd_reference(args) -> int:
    scenario, registry = _load(args.scenario)
    for p in write_reference(scenario, args.out, registry):
        print(p)
    return EXIT_OK


def cmd_run(args) -> int:
    scenario, registry = _load(args.scenario)
    plan = plan_run(scenario, registry, args.out)
    report = run_distributed(
        plan, args.transport, host=args.host, port=args.port, startup_timeout=args.startup_timeout
    )
    print(f"status: {report.status} ({report.wall_clock:.2f} s)")
    for p in report.streams:
        print(p)
    if report.status == "aborted":
        print(f"error: {report.error}", file=sys.stderr)
        return EXIT_FAULT
    if report.status == "degraded":
        print(f"warning: {report.error}", file=sys.stderr)
    return EXIT_OK


def cmd_diff(args) -> int:
    a, b = args.a.read_bytes(), args.b.read_bytes()
    if a == b:
        return EXIT_OK
    la, lb = a.split(b"\n"), b.split(b"\n")
    for i, (x, y) in enumerate(zip(la, lb), start=1):
        if x != y:
            print(f"streams differ at line {i}", file=sys.stderr)
            break
    else:
        print(f"streams differ in length ({len(la)} vs {len(lb)} lines)", file=sys.stderr)
    return EXIT_FINDINGS


COMMANDS = {"run": cmd_run, "check": cmd_check, "fom": cmd_fom, "reference": cmd_reference, "diff": cmd_diff}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ScenarioError as exc:
        _print_findings(exc)
        return EXIT_FINDINGS
    except OSError as exc:
        code = type(exc).__name__.removesuffix("Error")
        print(f"{code}: {exc}", file=sys.stderr)
        return EXIT_FINDINGS
    except ScensimError as exc:
        print(f"fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT


if __name__ == "__main__":
    sys.exit(main())
