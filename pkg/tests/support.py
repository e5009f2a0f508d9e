"""Small builders shared by the test modules."""

from cuasutm.bench import Scenario
from cuasutm.netsim import run_inproc


def scenario(*profiles, counts=(1,), delays="paper", group="G", **top):
    data = {"schema_version": 1, "name": "t", "counts": list(counts), "delays": delays,
            "groups": [{"name": group, "profiles": list(profiles)}], **top}
    return Scenario.from_json(data)


def profile(name, protocol=None, case=None, path=None, **kw):
    expect = path if path else {"protocol": protocol, "case": case}
    return {"name": name, "expect": expect, **kw}


def simulate(sc, count=None, seed=None):
    world, expects = sc.build(sc.groups[0], count or sc.counts[0], seed)
    return run_inproc(world), expects


# one line per acceptance criterion, printed by the terminal-summary hook in conftest
VERDICTS: list[str] = []


def criterion(number, title, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'} [{number}] {title}" + (f": {detail}" if detail else "")
    VERDICTS.append(line)
    print(line)
    assert ok, line
