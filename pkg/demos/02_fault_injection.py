"""
Database faults and how they change the verdict
===============================================

The same registered, authorized drone is flown three times: once with its
ID-DB entry hidden from the CUAS, once with the entry hidden but repaired
shortly after the report, and once with no fault at all.
"""

from cuasutm.bench import Scenario
from cuasutm.netsim import run_inproc


def fly(**profile):
    scenario = Scenario.from_json({
        "schema_version": 1, "name": "faults", "counts": [1], "delays": "paper",
        "groups": [{"name": "g", "profiles": [{"name": "d", "expect": "green", **profile}]}],
    })
    world, _ = scenario.build(scenario.groups[0], 1)
    return run_inproc(world)


runs = {
    "fault held": fly(faults=["id_db_miss"]),
    "fault repaired after 300 ms": fly(faults=["id_db_miss"], repair_after_ms=300),
    "no fault": fly(),
}

for label, result in runs.items():
    if result.sessions:
        s = result.sessions[0]
        verdict = f"protocol {s.protocol} {s.case_label}: {s.outcome.kind.value}"
    else:
        verdict = "no clarification needed: " + result.outcomes["d-0000"]
    print(f"{label:<30} {verdict}")

# The CUAS still trusts the broadcast, because the token checks out even when
# the database lookup misses. That is what sends the drone to protocol 3 rather
# than to a local interdiction.
