"""Acceptance suite: one test and one PASS/FAIL line per criterion.

Tolerances are pinned here and nowhere else. Run with ``pytest tests/test_acceptance.py``;
the verdict lines are repeated in the terminal summary.
"""

import csv
import io
import random
import time
from collections import Counter
from statistics import fmean

import pytest

from cuasutm.bench import Scenario, builtin, delay_budget, read_csv, run_sweep, to_csv
from cuasutm.cases import ORACLE, enumerate_cells, verify
from cuasutm.domain import Decision, DroneId, TOLERANCE_KINDS
from cuasutm.messages import OperatorResponse
from cuasutm.netsim import run_inproc
from cuasutm.postdetect import (
    CheckEvent, Color, EventKind as E, State as S, ToleranceCounter, TRANSITIONS, apply_tolerance,
    color, export_edges, protocol_trigger, step,
)

from support import criterion, profile, scenario, simulate

CASE_ORACLE_BUDGET_S = 5.0
SWEEP_BUDGET_S = 600.0
BUDGET_TOL = 0.005
SINGLE_DRONE_MEAN_S = (1.0, 5.0)
THRESHOLDS = (0, 1, 2, 5)
LIVENESS_SESSIONS = 10_000


@pytest.fixture(scope="module")
def paper():
    return Scenario.load(builtin("paper"))


@pytest.fixture(scope="module")
def sweep(paper):
    return run_sweep(paper)


# 1 ---------------------------------------------------------------------------------

def test_case_oracle():
    t0 = time.perf_counter()
    verdicts, problems = verify(enumerate_cells())
    elapsed = time.perf_counter() - t0
    split = Counter(v.case.protocol for v in verdicts if v.passed)
    passed = sum(v.passed for v in verdicts)
    ok = (passed == len(ORACLE) == 29 and not problems and elapsed < CASE_ORACLE_BUDGET_S
          and [split[p] for p in range(1, 9)] == [6, 3, 2, 3, 2, 3, 5, 5])
    criterion(1, "case oracle", ok, f"{passed}/29 exact, {len(problems)} problems, {elapsed:.2f} s")


# 2 ---------------------------------------------------------------------------------

def _reach(graph, start):
    seen, todo = set(), [start]
    while todo:
        for nxt in graph.get(todo.pop(), ()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def test_fsm_reachability_and_deadlock_freedom():
    rows = list(csv.DictReader(io.StringIO(export_edges())))
    graph, colors = {}, {}
    for r in rows:
        graph.setdefault(r["state"], set()).add(r["next_state"])
        colors[r["next_state"]] = r["color"]
    orange = [s.value for s in S if color(s) is Color.ORANGE]
    stranded = [s for s in orange
                if not {"Green", "Red"} <= {colors.get(x) for x in _reach(graph, s)}]

    loop = [S.DRONE_DETECTED]
    for kind in (E.RID_RECEIVED, E.AUTHENTICITY_OK, E.ID_DB_HIT, E.ID_VALID, E.AUTH_DB_HIT,
                 E.AREA_OK, E.TIME_OK, E.OBJECT_CLASSIFIED_AS_DRONE):
        loop.append(step(loop[-1], CheckEvent(kind)))
    green_loop = (loop[-1] is S.DRONE_DETECTED and S.COMPLIANT in loop
                  and all(color(s) is Color.GREEN for s in loop))

    late = []
    triggers = [s for s in S if protocol_trigger(s) is not None]
    for state in triggers:
        kinds = sorted(k[1] for (src, k) in TRANSITIONS if src is state
                       and k[0] is E.PROTOCOL_OUTCOME and k[1] in TOLERANCE_KINDS)
        for n in THRESHOLDS if kinds else ():
            counter, runs = ToleranceCounter(), 0
            while runs <= n + 1:
                runs += 1
                d = apply_tolerance(counter, DroneId("A"), protocol_trigger(state), Decision(kinds[0]), n)
                if color(step(state, CheckEvent.outcome(d))) is Color.RED:
                    break
            if runs != n + 1:
                late.append((state.value, n, runs))
    ok = bool(orange) and not stranded and green_loop and not late
    criterion(2, "FSM reachability", ok,
              f"{len(orange)} orange states, {len(stranded)} stranded, green loop {green_loop}, "
              f"N in {THRESHOLDS}: {len(late)} late interdictions")


# 3 ---------------------------------------------------------------------------------

def test_delay_budget():
    got = (delay_budget(1.16, 2.5, 0, 0, False), delay_budget(1.16, 2.5, 25, 0, False),
           delay_budget(1.16, 2.5, 25, 0, True))
    ok = abs(got[0] - 0.68) <= BUDGET_TOL and abs(got[1] - 0.09) <= BUDGET_TOL and got[2] == 0
    criterion(3, "delay budget", ok, ", ".join(f"{g:.2%}" for g in got))


# 4 ---------------------------------------------------------------------------------

def test_determinism(sweep, paper, tmp_path):
    first = sweep.write(tmp_path / "a")["transcript.jsonl"].read_bytes()
    second = run_sweep(paper).write(tmp_path / "b")["transcript.jsonl"].read_bytes()
    ok = first == second and len(first) > 0
    lines = len(first.splitlines())
    criterion(4, "determinism", ok, f"{lines} transcript lines, byte-identical {first == second}")


# 5 ---------------------------------------------------------------------------------

def test_transport_equivalence(sweep, paper):
    sock = run_sweep(paper, transport="socket")
    diff = [(r.group, r.count) for r in sweep.runs
            if r.result.session_outcomes() != sock.run(r.group, r.count).result.session_outcomes()]
    n = sum(len(r.result.sessions) for r in sweep.runs)
    criterion(5, "transport equivalence", not diff and n > 0,
              f"{n} sessions over {len(sweep.runs)} runs, {len(diff)} differing runs")


# 6 ---------------------------------------------------------------------------------

def test_experiment_shape(sweep, paper):
    counts = paper.counts
    means = {c: fmean(x.delta_ms for r in sweep.runs if r.count == c for x in r.result.samples)
             for c in counts}
    single_s = means[1] / 1000
    a = SINGLE_DRONE_MEAN_S[0] <= single_s <= SINGLE_DRONE_MEAN_S[1]
    steps = counts == [1, 50, 100, 150, 200, 250]
    b = steps and all(means[x] <= means[y] for x, y in zip(counts, counts[1:]))
    lone, fifty = sweep.run("P3", 1).result, sweep.run("P3", 50).result
    c = len(fifty.samples) == 50 and fifty.duration_ms < 50 * lone.duration_ms
    cells = {(x.protocol, r.count) for r in sweep.runs for x in r.result.samples}
    table = {(s.protocol, s.count): s for s in read_csv(to_csv(sweep.summaries))}
    d = set(table) == cells and all(s.q1 <= s.median <= s.q3 <= s.max for s in table.values())
    fast = sweep.wall_s < SWEEP_BUDGET_S
    ok = a and b and c and d and fast and not sweep.mismatches
    criterion(6, "experiment shape", ok,
              f"(a) single-drone mean {single_s:.2f} s, "
              f"(b) means {[round(means[k]) for k in counts]} ms, "
              f"(c) 50xP3 {fifty.duration_ms} ms vs 50x{lone.duration_ms} ms, "
              f"(d) {len(table)}/{len(cells)} cells, sweep {sweep.wall_s:.1f} s")


# 7 ---------------------------------------------------------------------------------

# label, setup, faults, outcome with the fault held, after repair mid-protocol, without the fault
FAULT_TABLE = [
    ("ID-DB miss", {}, ["id_db_miss"], (3, "CASE1"), (3, "CASE2"), "Compliant"),
    ("ID-DB miss, unauthorized", {"authorized": False}, ["id_db_miss"], (2, "CASE2"), None, (6, "CASE2")),
    ("both databases miss", {}, ["id_db_miss", "auth_db_miss"], (2, "CASE3"), None, "Compliant"),
    ("stale expiry", {}, ["stale_expiry"], (5, "CASE1"), (5, "CASE2"), "Compliant"),
    ("AUTH-DB miss", {}, ["auth_db_miss"], (6, "CASE1"), None, "Compliant"),
]


def _observe(**kw):
    result, _ = simulate(scenario(profile("f", path="green", **kw), risk={"default": "High"}))
    if result.sessions:
        s = result.sessions[0]
        return s.protocol, s.case_label
    return result.outcomes["f-0000"]


def test_fault_injection_oracle():
    wrong = []
    for label, setup, faults, held, repaired, absent in FAULT_TABLE:
        seen = [_observe(faults=faults, **setup)]
        want = [held]
        if repaired:
            seen.append(_observe(faults=faults, repair_after_ms=300, **setup))
            want.append(repaired)
        seen.append(_observe(**setup))
        want.append(absent)
        if seen != want:
            wrong.append(f"{label} {faults}: {seen} != {want}")
    criterion(7, "fault-injection oracle", not wrong,
              f"{len(FAULT_TABLE)} toggles" + ("; " + "; ".join(wrong) if wrong else ""))


# 8 ---------------------------------------------------------------------------------

RESPONSES = [r.value for r in OperatorResponse]


def _random_profile(rng, i):
    p = {"name": f"r{i}", "expect": "green",
         "registered": rng.random() < 0.8, "expired": rng.random() < 0.3,
         "authorized": rng.random() < 0.6,
         "area": rng.choice(["inside", "outside"]), "window": rng.choice(["active", "ended"]),
         "faults": rng.sample(["id_db_miss", "auth_db_miss", "stale_expiry"], rng.randint(0, 2)),
         "rid": rng.random() < 0.8, "authentic": rng.random() < 0.95,
         "restores_rid": rng.random() < 0.5, "returns": rng.random() < 0.5,
         "stops": rng.random() < 0.5, "emergency": rng.random() < 0.2,
         "mission": rng.choice(["routine", "critical"]),
         # any answer, legal or not, and think times past the operator timeout
         "operator": {"response": rng.choice(RESPONSES),
                      "think_ms": sorted(rng.sample(range(15_000), 2))}}
    if not p["registered"]:
        p["expired"], p["faults"] = False, []
    if p["faults"] and rng.random() < 0.2:
        p["repair_after_ms"] = rng.randint(0, 3000)
    if rng.random() < 0.1:
        p["lost_after_ms"] = rng.randint(0, 6000)
    return p


def _random_world(seed, n=250):
    rng = random.Random(seed)
    sc = Scenario.from_json({
        "schema_version": 1, "name": "liveness", "seed": seed, "counts": [n],
        "delays": {"preset": "paper", "default_latency": [20, 400]},
        "risk": {"default": rng.choice(["Low", "High"]),
                 "rules": [{"mission": "critical", "risk": rng.choice(["Low", "High"])}]},
        "cuas": {"confirm": rng.choice(["Explicit", "Implicit"])},
        "groups": [{"name": "G", "profiles": [_random_profile(rng, i) for i in range(n)]}]})
    return sc.build(sc.groups[0], n, seed)[0]


def test_liveness():
    sessions = stuck = undecided = 0
    protocols = Counter()
    seed = 0
    while sessions < LIVENESS_SESSIONS:
        result = run_inproc(_random_world(seed))
        seed += 1
        sessions += len(result.sessions)
        stuck += sum(s.decided_at is None for s in result.sessions)
        undecided += sum(v == "-" for v in result.outcomes.values())
        protocols.update(s.protocol for s in result.sessions)
    ok = stuck == 0 and undecided == 0 and set(protocols) == set(range(1, 9))
    criterion(8, "liveness", ok, f"{sessions} sessions in {seed} runs, {stuck} stuck, "
                                 f"{undecided} drones without outcome, protocols {sorted(protocols)}")
