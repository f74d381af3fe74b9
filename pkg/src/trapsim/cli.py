"""Command line: ``trapsim run | verify | dump``.

Exit status is 0 on success, 1 when a check fails or a run aborts on a
safety violation, and 2 on usage, parse or trace-format errors.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine
from .requirements import RequirementId
from .scenario import ScenarioError, load_scenario
from .trace import TraceFormatError, parse_trace, write_trace
from .verifier import CHECKS, RunRecord, run_checks

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2


def _nat(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"{value} is negative")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trapsim", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write its trace")
    run.add_argument("--scenario", required=True, type=Path)
    run.add_argument("--stages", type=_nat, help="override the scenario's stage budget")
    run.add_argument("--trace", type=Path, help="write the event trace here")
    run.add_argument("--dump", type=Path, help="write a JSON snapshot of the final state here")
    run.add_argument("--quiet", action="store_true")

    verify = sub.add_parser("verify", help="run verifier checks over a trace")
    verify.add_argument("--trace", required=True, type=Path)
    verify.add_argument("--check", action="append", default=None, metavar="NAME",
                        help=f"repeatable; one of {', '.join(CHECKS)} or all (default all)")
    verify.add_argument("--snapshot", type=Path, help="also compare the replay against this snapshot")
    verify.add_argument("--report", type=Path, help="write one JSON verdict per line here")
    verify.add_argument("--quiet", action="store_true")

    dump = sub.add_parser("dump", help="print the coding maps for one m and the set A")
    dump.add_argument("--state", required=True, type=Path, help="a snapshot from run --dump, or a trace")
    dump.add_argument("--m", required=True, type=_nat)
    return parser


def _err(message: str) -> None:
    print(f"trapsim: {message}", file=sys.stderr)


def cmd_run(args) -> int:
    try:
        scenario = load_scenario(args.scenario)
        if args.stages is not None:
            scenario = scenario.with_stages(args.stages)
    except ScenarioError as exc:
        _err(str(exc))
        return EXIT_USAGE
    status = EXIT_OK
    try:
        state, events = engine.run(scenario)
    except engine.RunAborted as exc:
        _err(str(exc))
        state, events, status = exc.state, exc.state.trace, EXIT_CHECK
    try:
        if args.trace:
            write_trace(args.trace, scenario.to_dict(), events)
        if args.dump:
            args.dump.write_text(json.dumps(state.snapshot(), sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_USAGE
    if not args.quiet:
        sat = ",".join(str(RequirementId.of(p)) for p in state.satisfied()) or "-"
        print(f"stages={state.stage} |A|={len(state.A)} events={len(events)} satisfied={sat}")
    return status


def _load_record(path: Path) -> RunRecord:
    text = path.read_text(encoding="utf-8")
    scenario_dict, events = parse_trace(text)
    try:
        return RunRecord.from_trace(scenario_dict, events, text)
    except ScenarioError as exc:
        raise TraceFormatError(f"scenario header: {exc}") from None
    except (KeyError, IndexError, ValueError, TypeError) as exc:
        raise TraceFormatError(f"trace does not replay: {exc!r}") from None


def cmd_verify(args, parser) -> int:
    names = args.check or ["all"]
    unknown = [n for n in names if n != "all" and n not in CHECKS]
    if unknown:
        parser.print_usage(sys.stderr)
        _err(f"unknown check(s) {', '.join(unknown)}; choose from {', '.join(CHECKS)} or all")
        return EXIT_USAGE
    try:
        record = _load_record(args.trace)
        snapshot = json.loads(args.snapshot.read_text(encoding="utf-8")) if args.snapshot else None
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_USAGE
    except (TraceFormatError, json.JSONDecodeError) as exc:
        _err(f"{args.trace}: replay failure: {exc}")
        return EXIT_USAGE
    verdicts = run_checks(record, names, snapshot)
    if not args.quiet:
        for v in verdicts:
            print(v.line())
    if args.report:
        with open(args.report, "w", encoding="utf-8", newline="\n") as fh:
            for v in verdicts:
                fh.write(json.dumps(v.asdict(), sort_keys=True) + "\n")
    failed = [v.name for v in verdicts if not v.ok]
    if failed:
        _err(f"checks not passing: {', '.join(failed)}")
        return EXIT_CHECK
    return EXIT_OK


def _snapshot_from(path: Path) -> dict:
    text = path.read_text(encoding="utf-8")
    if text.startswith("# trace"):
        scenario_dict, events = parse_trace(text)
        return RunRecord.from_trace(scenario_dict, events).snapshot()
    return json.loads(text)


def cmd_dump(args) -> int:
    try:
        snap = _snapshot_from(args.state)
    except OSError as exc:
        _err(f"{exc.filename}: {exc.strerror}")
        return EXIT_USAGE
    except (TraceFormatError, json.JSONDecodeError, ScenarioError) as exc:
        _err(f"{args.state}: {exc}")
        return EXIT_USAGE
    maps = snap.get("targets", {}).get(str(args.m))
    if maps is None:
        known = sorted(int(m) for m in snap.get("targets", {}))
        scope = f"0..{known[-1]}" if known and known == list(range(len(known))) else ", ".join(map(str, known)) or "none"
        _err(f"m={args.m} is not in scope (known: {scope})")
        return EXIT_USAGE
    theta = {row[0]: row[1:] for row in maps["theta"]}
    lam = {row[0]: row[1:] for row in maps["lambda"]}
    out = sys.stdout
    out.write("z\ttheta\tlambda\ttheta_birth\ttheta_author\tlambda_birth\tlambda_author\n")
    for z in sorted(set(theta) | set(lam)):
        t = theta.get(z, ["", "", ""])
        lm = lam.get(z, ["", "", ""])
        out.write(f"{z}\t{t[0]}\t{lm[0]}\t{t[1]}\t{t[2]}\t{lm[1]}\t{lm[2]}\n")
    out.write("\nA\tentry_stage\n")
    for x, stage in snap.get("A", []):
        out.write(f"{x}\t{stage}\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    if args.command == "verify":
        return cmd_verify(args, parser)
    return cmd_dump(args)


if __name__ == "__main__":
    sys.exit(main())
