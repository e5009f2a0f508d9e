"""Command-line entry point: ``cuasutm {run,replay,fsm-export,cases,budget}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .. import cases as case_oracle
from ..postdetect import export_edges
from .budget import DivisionDomain, delay_budget
from .scenario import Scenario, ScenarioInvalid
from .sweep import TRANSPORTS, run_sweep

log = logging.getLogger("cuasutm")


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--transport", choices=TRANSPORTS, default="inproc")
    p.add_argument("--clock", choices=("virtual", "wall"), default=None,
                   help="defaults to the scenario's clock")
    p.add_argument("--seed", type=int, default=None, help="overrides the scenario seed (u64)")
    p.add_argument("--port", type=int, default=0, help="authority port for the socket transport")
    p.add_argument("--counts", type=lambda s: [int(x) for x in s.split(",")], default=None,
                   help="comma-separated drone counts overriding the scenario")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cuasutm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a sweep and write CSV and transcripts")
    run.add_argument("scenario_file", nargs="?")
    run.add_argument("--scenario", dest="scenario_flag")
    run.add_argument("--out", default="out")
    _add_run_flags(run)

    replay = sub.add_parser("replay", help="re-run a recorded sweep and compare transcripts")
    replay.add_argument("transcript")
    replay.add_argument("--scenario", default=None,
                        help="scenario file; defaults to the run.json next to the transcript")
    _add_run_flags(replay)

    fsm = sub.add_parser("fsm-export", help="print the transition table as an edge list")
    fsm.add_argument("--out", default=None)

    sub.add_parser("cases", help="verify the engine against the 29-case table")

    budget = sub.add_parser("budget", help="fraction of reaction time spent clarifying")
    budget.add_argument("--detect", type=float, required=True, metavar="S")
    budget.add_argument("--clarify", type=float, required=True, metavar="S")
    budget.add_argument("--timeout", type=float, default=0.0, metavar="S")
    budget.add_argument("--interdict", type=float, default=0.0, metavar="S")
    budget.add_argument("--tolerated", action="store_true")
    return parser


def _cmd_run(args, parser) -> int:
    path = args.scenario_flag or args.scenario_file
    if path is None:
        parser.error("run needs a scenario file")
    if not Path(path).is_file():
        parser.error(f"scenario file not found: {path}")
    try:
        scenario = Scenario.load(path)
    except ScenarioInvalid as exc:
        parser.error(f"invalid scenario: {exc}")
    if args.counts:
        scenario = scenario.with_counts(args.counts)
    result = run_sweep(scenario, args.transport, args.clock, args.seed, args.port,
                       progress=lambda r: log.info("%s x%d: %d samples", r.group, r.count,
                                                   len(r.result.samples)))
    paths = result.write(args.out)
    print(paths["results.csv"].read_text(), end="")
    print(f"# {len(result.runs)} runs in {result.wall_s:.2f} s -> {Path(args.out).resolve()}")
    for m in result.mismatches:
        print(f"MISMATCH {m}")
    return 1 if result.mismatches else 0


def _cmd_replay(args, parser) -> int:
    transcript = Path(args.transcript)
    if not transcript.is_file():
        parser.error(f"transcript not found: {transcript}")
    manifest_path = transcript.with_name("run.json")
    manifest = json.loads(manifest_path.read_text()) if manifest_path.is_file() else {}
    if args.scenario:
        scenario = Scenario.load(args.scenario)
    elif manifest.get("scenario"):
        scenario = Scenario.from_json(manifest["scenario"])
    else:
        parser.error("no scenario: pass --scenario or keep run.json next to the transcript")
    counts = args.counts or manifest.get("counts")
    if counts:
        scenario = scenario.with_counts(counts)
    clock = args.clock or manifest.get("clock", scenario.clock)
    if clock != "virtual":
        parser.error("only virtual-clock transcripts can be replayed byte for byte")
    transport = manifest.get("transport", args.transport)
    seed = args.seed if args.seed is not None else manifest.get("seed")
    fresh = run_sweep(scenario, transport, clock, seed, args.port).transcript_lines()
    recorded = transcript.read_text().splitlines()
    for i, (a, b) in enumerate(zip(recorded, fresh)):
        if a != b:
            print(f"DIVERGED at line {i + 1}\n  recorded: {a}\n  replayed: {b}")
            return 1
    if len(recorded) != len(fresh):
        print(f"DIVERGED: {len(recorded)} recorded lines vs {len(fresh)} replayed")
        return 1
    print(f"IDENTICAL {len(recorded)} lines")
    return 0


def _cmd_cases() -> int:
    verdicts, problems = case_oracle.verify()
    for v in verdicts:
        print(v.line())
    for p in problems:
        print(f"PROBLEM {p}")
    failed = sum(not v.passed for v in verdicts)
    print(f"# {len(verdicts) - failed}/{len(verdicts)} cases pass")
    return 1 if failed or problems else 0


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args, parser)
    if args.command == "replay":
        return _cmd_replay(args, parser)
    if args.command == "fsm-export":
        text = export_edges()
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
        return 0
    if args.command == "cases":
        return _cmd_cases()
    try:
        frac = delay_budget(args.detect, args.clarify, args.timeout, args.interdict, args.tolerated)
    except (DivisionDomain, ValueError) as exc:
        parser.error(str(exc))
    print(f"{frac:.4f} ({frac * 100:.1f}%)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
