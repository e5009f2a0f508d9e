"""
One drone outside its authorized area
=====================================

A single drone flies outside the area it was cleared for. The CUAS notices,
reports to the authority, and the authority asks the operator to come back.
The operator says they are returning, the CUAS re-checks the position, and
the authority confirms. Everything runs on the virtual clock, so the printed
timestamps are the same on every machine.
"""

from cuasutm.bench import Scenario
from cuasutm.netsim import run_inproc

# A scenario is plain JSON. One group, one profile, one drone.
scenario = Scenario.from_json({
    "schema_version": 1, "name": "one-drone", "counts": [1], "delays": "paper",
    "groups": [{"name": "demo", "profiles": [{
        "name": "stray", "area": "outside", "returns": True,
        "expect": {"protocol": 7, "case": "CASE4"},
        "operator": {"response": "ReturnedToArea", "think_ms": 2000},
    }]}],
})
world, expects = scenario.build(scenario.groups[0], 1)
result = run_inproc(world)

# The message sequence, as the bus delivered it (timer ticks left out).
for t, env in result.transcript:
    if env.msg_type != "TIMER":
        print(f"{t:>7} ms  {env.sender:>14} -> {env.recipient:<14} {env.msg_type}")

# What the authority decided and how long the CUAS waited for it.
session = result.sessions[0]
sample = result.samples[0]
print()
print("protocol", session.protocol, session.case_label, "->", session.outcome.kind.value)
print("clarification time", sample.delta_ms, "ms")
