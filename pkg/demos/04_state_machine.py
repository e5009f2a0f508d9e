"""
The post-detection state machine
================================

Feeds check results into the per-drone state machine, first for a compliant
drone and then for one that keeps getting tolerated until the threshold runs
out.
"""

from cuasutm.domain import Decision, DecisionKind, DroneId
from cuasutm.postdetect import (
    CheckEvent, DroneFsm, EventKind as E, State, ToleranceCounter, apply_tolerance, color,
    protocol_trigger, step,
)

# A drone that passes every check goes round the green loop.
fsm = DroneFsm(state=State.DRONE_DETECTED)
fsm.feed_all(CheckEvent(k) for k in (
    E.RID_RECEIVED, E.AUTHENTICITY_OK, E.ID_DB_HIT, E.ID_VALID, E.AUTH_DB_HIT,
    E.AREA_OK, E.TIME_OK, E.OBJECT_CLASSIFIED_AS_DRONE))
print(" -> ".join(f"{s.value} ({color(s).value})" for s in fsm.visited()))

# Without authorization the drone lands in the protocol 6 trigger state.
state = State.MISSION_NOT_AUTHORIZED
print()
print(state.value, "triggers protocol", protocol_trigger(state))

# Each tolerance counts against the drone. With a threshold of 2 the third
# tolerance becomes a timed interdiction.
counter = ToleranceCounter()
drone = DroneId("stubborn")
for attempt in range(1, 4):
    decision = apply_tolerance(counter, drone, 6, Decision(DecisionKind.TOLERATE_MISSION), threshold=2)
    after = step(state, CheckEvent.outcome(decision))
    print(f"run {attempt}: {decision.kind.value:<20} -> {after.value} ({color(after).value})")
