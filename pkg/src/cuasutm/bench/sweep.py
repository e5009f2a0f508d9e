"""The load sweep: every group at every drone count, aggregated per protocol."""

from __future__ import annotations

import json
import time
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from ..netsim import SimResult, run_inproc
from .scenario import Expect, Group, Scenario
from .stats import StatsSummary, to_csv

TRANSPORTS = ("inproc", "socket")


@dataclass
class RunRecord:
    group: str
    count: int
    result: SimResult
    mismatches: list[str]


@dataclass
class SweepResult:
    scenario: Scenario
    transport: str
    clock: str
    seed: int
    summaries: list[StatsSummary]
    runs: list[RunRecord] = field(repr=False)
    wall_s: float = 0.0

    @property
    def mismatches(self) -> list[str]:
        return [f"{r.group}@{r.count}: {m}" for r in self.runs for m in r.mismatches]

    def summary(self, protocol: int, count: int) -> StatsSummary | None:
        for s in self.summaries:
            if (s.protocol, s.count) == (protocol, count):
                return s
        return None

    def run(self, group: str, count: int) -> RunRecord:
        return next(r for r in self.runs if (r.group, r.count) == (group, count))

    def transcript_lines(self) -> list[str]:
        return [line for r in self.runs for line in r.result.transcript_lines()]

    def write(self, out: str | Path) -> dict[str, Path]:
        out = Path(out)
        out.mkdir(parents=True, exist_ok=True)
        paths = {name: out / name for name in
                 ("results.csv", "samples.csv", "transcript.jsonl", "sessions.jsonl",
                  "audit.jsonl", "run.json")}
        paths["results.csv"].write_text(to_csv(self.summaries))
        rows = ["group,count,drone_id,protocol,case,delta_ms"]
        rows += [f"{r.group},{r.count},{x.drone_id},{x.protocol},{x.case_label},{x.delta_ms}"
                 for r in self.runs for x in r.result.samples]
        paths["samples.csv"].write_text("\n".join(rows) + "\n")
        _write_lines(paths["transcript.jsonl"], self.transcript_lines())
        _write_lines(paths["sessions.jsonl"], (
            _dumps({"group": r.group, "count": r.count, **s.summary()})
            for r in self.runs for s in r.result.sessions))
        _write_lines(paths["audit.jsonl"], (
            _dumps({"group": r.group, "count": r.count, **rec})
            for r in self.runs for rec in r.result.court))
        paths["run.json"].write_text(json.dumps({
            "scenario": self.scenario.source, "counts": self.scenario.counts,
            "transport": self.transport, "clock": self.clock, "seed": self.seed,
            "mismatches": self.mismatches}, indent=2, sort_keys=True) + "\n")
        return paths


def _dumps(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _write_lines(path: Path, lines) -> None:
    with path.open("w") as f:
        for line in lines:
            f.write(line + "\n")


def check_expectations(result: SimResult, expects: dict[str, Expect]) -> list[str]:
    """Compare each drone's outcome with the outcome its profile promised."""
    got = {x.drone_id: x for x in result.samples}
    problems = []
    for drone, exp in sorted(expects.items()):
        sample = got.get(drone)
        outcome = result.outcomes.get(drone, "-")
        if exp.path == "green":
            if sample is not None or outcome != "Compliant":
                problems.append(f"{drone}: expected green path, got {outcome}")
        elif exp.path == "local":
            if sample is not None or not outcome.startswith("local:"):
                problems.append(f"{drone}: expected local interdiction, got {outcome}")
        elif sample is None:
            problems.append(f"{drone}: expected P{exp.protocol} {exp.case}, no decision ({outcome})")
        elif (sample.protocol, sample.case_label) != (exp.protocol, exp.case):
            problems.append(f"{drone}: expected P{exp.protocol} {exp.case}, "
                            f"got P{sample.protocol} {sample.case_label}")
    return problems


def run_once(scenario: Scenario, group: Group, count: int, transport: str = "inproc",
             clock: str = "virtual", seed: int | None = None, port: int = 0) -> RunRecord:
    world, expects = scenario.build(group, count, seed)
    if transport == "inproc":
        if clock != "virtual":
            raise ValueError("the in-process transport runs on the virtual clock only")
        result = run_inproc(world)
    elif transport == "socket":
        from ..netsim.sockets import run_socket

        result = run_socket(world, clock=clock, port=port, time_scale=scenario.time_scale)
    else:
        raise ValueError(f"unknown transport {transport!r}")
    return RunRecord(group.name, count, result, check_expectations(result, expects))


def summarize(runs: list[RunRecord]) -> list[StatsSummary]:
    cells: dict[tuple[int, int], list[int]] = defaultdict(list)
    for r in runs:
        for x in r.result.samples:
            cells[(x.protocol, r.count)].append(x.delta_ms)
    return [StatsSummary.of(p, c, v) for (p, c), v in sorted(cells.items())]


def run_sweep(scenario: Scenario, transport: str = "inproc", clock: str | None = None,
              seed: int | None = None, port: int = 0,
              progress: Callable[[RunRecord], None] | None = None) -> SweepResult:
    clock = clock or scenario.clock
    seed = scenario.seed if seed is None else seed
    t0 = time.perf_counter()
    runs = []
    for count in scenario.counts:
        for group in scenario.groups:
            rec = run_once(scenario, group, count, transport, clock, seed, port)
            runs.append(rec)
            if progress is not None:
                progress(rec)
    return SweepResult(scenario, transport, clock, seed, summarize(runs), runs,
                       time.perf_counter() - t0)
