"""Post-detection finite-state machine run by a CUAS for every tracked drone."""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from .domain import Decision, DecisionKind, DroneId, RemoteIdMessage


class IllegalTransition(Exception):
    def __init__(self, state, event):
        super().__init__(f"no transition from {state.value} on {event}")
        self.state = state
        self.event = event


class Color(str, enum.Enum):
    GREEN = "Green"
    ORANGE = "Orange"
    RED = "Red"


class State(str, enum.Enum):
    SURVEILLANCE = "Surveillance"
    DRONE_DETECTED = "DroneDetected"
    ID_RECEIVED = "IdReceived"
    AUTHENTIC_ID = "AuthenticId"
    KNOWN_ID = "KnownId"
    NO_ID_RECEIVED = "NoIdReceived"
    NO_ID_NO_POTENTIAL_OPERATOR = "NoIdNoPotentialOperator"
    NO_ID_BUT_POTENTIAL_OPERATOR = "NoIdButPotentialOperator"
    FAKE_ID = "FakeId"
    ID_NOT_IN_ID_DB = "IdNotInIdDb"
    UNKNOWN_ID = "UnknownId"
    ID_KNOWN_BUT_NO_AUTH = "IdKnownButNoAuth"
    EXPIRED_ID = "ExpiredId"
    EXPIRED_ID_UNAUTHORIZED = "ExpiredIdUnauthorized"
    EXPIRED_ID_BUT_AUTHORIZED = "ExpiredIdButAuthorized"
    VALID_ID = "ValidId"
    MISSION_NOT_AUTHORIZED = "MissionNotAuthorized"
    AUTHORIZED_MISSION = "AuthorizedMission"
    IN_AUTHORIZED_AREA = "InAuthorizedArea"
    AREA_VIOLATION = "AreaViolation"
    TIME_VIOLATION = "TimeViolation"
    COMPLIANT = "Compliant"
    TOLERATE_ID_FAILURE = "TolerateIdFailure"
    TOLERATE_AUTH_FAILURE = "TolerateAuthFailure"
    IMMEDIATE_INTERDICTION = "ImmediateInterdiction"
    TIMED_INTERDICTION = "TimedInterdiction"


S = State

GREEN_STATES = frozenset({
    S.SURVEILLANCE, S.DRONE_DETECTED, S.ID_RECEIVED, S.AUTHENTIC_ID, S.KNOWN_ID,
    S.VALID_ID, S.AUTHORIZED_MISSION, S.IN_AUTHORIZED_AREA, S.COMPLIANT,
    S.TOLERATE_ID_FAILURE, S.TOLERATE_AUTH_FAILURE,
})
# FakeId and NoIdNoPotentialOperator already mark the drone as uncooperative
RED_STATES = frozenset({
    S.IMMEDIATE_INTERDICTION, S.TIMED_INTERDICTION, S.FAKE_ID, S.NO_ID_NO_POTENTIAL_OPERATOR,
})


def color(s: State) -> Color:
    if s in GREEN_STATES:
        return Color.GREEN
    if s in RED_STATES:
        return Color.RED
    return Color.ORANGE


class EventKind(str, enum.Enum):
    OBJECT_CLASSIFIED_AS_DRONE = "ObjectClassifiedAsDrone"
    RID_RECEIVED = "RidReceived"
    RID_TIMEOUT = "RidTimeout"
    AUTHENTICITY_OK = "AuthenticityOk"
    AUTHENTICITY_FAIL = "AuthenticityFail"
    ID_DB_HIT = "IdDbHit"
    ID_DB_MISS = "IdDbMiss"
    ID_VALID = "IdValid"
    ID_EXPIRED = "IdExpired"
    AUTH_DB_HIT = "AuthDbHit"
    AUTH_DB_MISS = "AuthDbMiss"
    POTENTIAL_OPERATOR_FOUND = "PotentialOperatorFound"
    NO_POTENTIAL_OPERATOR = "NoPotentialOperator"
    AREA_OK = "AreaOk"
    AREA_VIOLATED = "AreaViolated"
    TIME_OK = "TimeOk"
    TIME_VIOLATED = "TimeViolated"
    PROTOCOL_OUTCOME = "ProtocolOutcome"
    MISSION_ENDED_OR_OUT_OF_RANGE = "MissionEndedOrOutOfRange"
    # materialized pseudo-event for the unconditional successors of FakeId and
    # NoIdNoPotentialOperator
    AUTO = "Auto"


E = EventKind


@dataclass(frozen=True)
class CheckEvent:
    kind: EventKind
    decision: DecisionKind | None = None
    rid: RemoteIdMessage | None = field(default=None, compare=False)
    potential: object | None = field(default=None, compare=False)

    @classmethod
    def outcome(cls, decision: Decision | DecisionKind) -> CheckEvent:
        kind = decision.kind if isinstance(decision, Decision) else decision
        return cls(E.PROTOCOL_OUTCOME, decision=kind)

    def key(self) -> tuple[EventKind, DecisionKind | None]:
        return (self.kind, self.decision)

    def __str__(self) -> str:
        if self.decision is not None:
            return f"{self.kind.value}({self.decision.value})"
        return self.kind.value


def ev(kind: EventKind) -> CheckEvent:
    return CheckEvent(kind)


D = DecisionKind


def _build_table() -> dict[tuple[State, tuple[EventKind, DecisionKind | None]], State]:
    t: dict = {}

    def add(src, event, dst, decision=None):
        t[(src, (event, decision))] = dst

    add(S.SURVEILLANCE, E.OBJECT_CLASSIFIED_AS_DRONE, S.DRONE_DETECTED)
    add(S.DRONE_DETECTED, E.RID_RECEIVED, S.ID_RECEIVED)
    add(S.DRONE_DETECTED, E.RID_TIMEOUT, S.NO_ID_RECEIVED)
    add(S.NO_ID_RECEIVED, E.POTENTIAL_OPERATOR_FOUND, S.NO_ID_BUT_POTENTIAL_OPERATOR)
    add(S.NO_ID_RECEIVED, E.NO_POTENTIAL_OPERATOR, S.NO_ID_NO_POTENTIAL_OPERATOR)
    add(S.NO_ID_NO_POTENTIAL_OPERATOR, E.AUTO, S.IMMEDIATE_INTERDICTION)
    add(S.ID_RECEIVED, E.AUTHENTICITY_OK, S.AUTHENTIC_ID)
    add(S.ID_RECEIVED, E.AUTHENTICITY_FAIL, S.FAKE_ID)
    add(S.FAKE_ID, E.AUTO, S.IMMEDIATE_INTERDICTION)
    add(S.AUTHENTIC_ID, E.ID_DB_HIT, S.KNOWN_ID)
    add(S.AUTHENTIC_ID, E.ID_DB_MISS, S.ID_NOT_IN_ID_DB)
    add(S.ID_NOT_IN_ID_DB, E.AUTH_DB_HIT, S.ID_KNOWN_BUT_NO_AUTH)
    add(S.ID_NOT_IN_ID_DB, E.AUTH_DB_MISS, S.UNKNOWN_ID)
    add(S.KNOWN_ID, E.ID_VALID, S.VALID_ID)
    add(S.KNOWN_ID, E.ID_EXPIRED, S.EXPIRED_ID)
    add(S.EXPIRED_ID, E.AUTH_DB_HIT, S.EXPIRED_ID_BUT_AUTHORIZED)
    add(S.EXPIRED_ID, E.AUTH_DB_MISS, S.EXPIRED_ID_UNAUTHORIZED)
    # tolerated states behave as their green counterparts
    for src in (S.VALID_ID, S.TOLERATE_ID_FAILURE):
        add(src, E.AUTH_DB_HIT, S.AUTHORIZED_MISSION)
        add(src, E.AUTH_DB_MISS, S.MISSION_NOT_AUTHORIZED)
    for src in (S.AUTHORIZED_MISSION, S.TOLERATE_AUTH_FAILURE):
        add(src, E.AREA_OK, S.IN_AUTHORIZED_AREA)
        add(src, E.AREA_VIOLATED, S.AREA_VIOLATION)
    add(S.IN_AUTHORIZED_AREA, E.TIME_OK, S.COMPLIANT)
    add(S.IN_AUTHORIZED_AREA, E.TIME_VIOLATED, S.TIME_VIOLATION)
    add(S.COMPLIANT, E.OBJECT_CLASSIFIED_AS_DRONE, S.DRONE_DETECTED)
    for src in (S.TOLERATE_ID_FAILURE, S.TOLERATE_AUTH_FAILURE):
        add(src, E.OBJECT_CLASSIFIED_AS_DRONE, S.DRONE_DETECTED)

    outcomes = {
        S.NO_ID_BUT_POTENTIAL_OPERATOR: {
            D.IMMEDIATE_INTERDICTION: S.IMMEDIATE_INTERDICTION,
            D.TOLERATE_ID_FAILURE: S.TOLERATE_ID_FAILURE,
            D.RESTORATION_CONFIRMED: S.ID_RECEIVED,
        },
        S.UNKNOWN_ID: {
            D.IMMEDIATE_INTERDICTION: S.IMMEDIATE_INTERDICTION,
            D.TOLERATE_AUTH_FAILURE: S.TOLERATE_AUTH_FAILURE,
        },
        S.ID_KNOWN_BUT_NO_AUTH: {
            D.TOLERATE_ID_FAILURE: S.TOLERATE_ID_FAILURE,
            D.RESTORATION_CONFIRMED: S.VALID_ID,
            # escalation to unknown-ID semantics
            D.IMMEDIATE_INTERDICTION: S.IMMEDIATE_INTERDICTION,
            D.TOLERATE_AUTH_FAILURE: S.TOLERATE_AUTH_FAILURE,
        },
        S.EXPIRED_ID_UNAUTHORIZED: {
            D.TOLERATE_AUTH_FAILURE: S.TOLERATE_AUTH_FAILURE,
            D.RESTORATION_CONFIRMED: S.VALID_ID,
        },
        S.EXPIRED_ID_BUT_AUTHORIZED: {
            D.TOLERATE_ID_FAILURE: S.TOLERATE_ID_FAILURE,
            D.RESTORATION_CONFIRMED: S.VALID_ID,
            D.TOLERATE_AUTH_FAILURE: S.TOLERATE_AUTH_FAILURE,
        },
        S.MISSION_NOT_AUTHORIZED: {
            D.ISSUE_RESOLVED: S.AUTHORIZED_MISSION,
            D.TOLERATE_MISSION: S.TOLERATE_AUTH_FAILURE,
        },
        S.AREA_VIOLATION: {
            D.TOLERATE_MISSION: S.TOLERATE_AUTH_FAILURE,
            D.RESTORATION_CONFIRMED: S.AUTHORIZED_MISSION,
        },
        S.TIME_VIOLATION: {
            D.TOLERATE_MISSION: S.TOLERATE_AUTH_FAILURE,
            D.ISSUE_RESOLVED: S.SURVEILLANCE,
        },
    }
    for src, mapping in outcomes.items():
        # every protocol may end in timed interdiction (tolerance override)
        mapping.setdefault(D.TIMED_INTERDICTION, S.TIMED_INTERDICTION)
        for decision, dst in mapping.items():
            add(src, E.PROTOCOL_OUTCOME, dst, decision)
        add(src, E.PROTOCOL_OUTCOME, S.SURVEILLANCE, D.CANCELLED)

    for s in State:
        if s is not S.SURVEILLANCE:
            add(s, E.MISSION_ENDED_OR_OUT_OF_RANGE, S.SURVEILLANCE)
    return t


TRANSITIONS = _build_table()

PROTOCOL_TRIGGERS: dict[State, int] = {
    S.NO_ID_BUT_POTENTIAL_OPERATOR: 1,
    S.UNKNOWN_ID: 2,
    S.ID_KNOWN_BUT_NO_AUTH: 3,
    S.EXPIRED_ID_UNAUTHORIZED: 4,
    S.EXPIRED_ID_BUT_AUTHORIZED: 5,
    S.MISSION_NOT_AUTHORIZED: 6,
    S.AREA_VIOLATION: 7,
    S.TIME_VIOLATION: 8,
}

FORCED_SUCCESSORS = {s: TRANSITIONS[(s, (E.AUTO, None))]
                     for s in State if (s, (E.AUTO, None)) in TRANSITIONS}


def step(s: State, e: CheckEvent) -> State:
    try:
        return TRANSITIONS[(s, e.key())]
    except KeyError:
        raise IllegalTransition(s, e) from None


def protocol_trigger(s: State) -> int | None:
    return PROTOCOL_TRIGGERS.get(s)


def legal_events(s: State) -> list[CheckEvent]:
    return [CheckEvent(k[0], k[1]) for (src, k) in TRANSITIONS if src is s]


def edge_list() -> list[tuple[str, str, str, str]]:
    """``(state, event, next_state, color-of-next)`` rows in a stable order."""
    rows = []
    for (src, (kind, decision)), dst in TRANSITIONS.items():
        label = f"{kind.value}({decision.value})" if decision else kind.value
        rows.append((src.value, label, dst.value, color(dst).value))
    order = {s.value: i for i, s in enumerate(State)}
    rows.sort(key=lambda r: (order[r[0]], r[1]))
    return rows


def export_edges() -> str:
    lines = ["state,event,next_state,color"]
    lines += [",".join(row) for row in edge_list()]
    return "\n".join(lines) + "\n"


def successors(s: State) -> set[State]:
    return {dst for (src, _), dst in TRANSITIONS.items() if src is s}


def reachable(start: State) -> set[State]:
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in successors(cur):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


class ToleranceCounter:
    """Tolerance decisions granted per (drone, protocol) within a tracking episode."""

    def __init__(self):
        self._counts: dict[tuple[DroneId, int], int] = defaultdict(int)

    def count(self, drone: DroneId, protocol: int) -> int:
        return self._counts.get((drone, protocol), 0)

    def increment(self, drone: DroneId, protocol: int) -> int:
        self._counts[(drone, protocol)] += 1
        return self._counts[(drone, protocol)]

    def reset(self, drone: DroneId) -> None:
        for key in [k for k in self._counts if k[0] == drone]:
            del self._counts[key]


DEFAULT_TOLERANCE_THRESHOLD = 2
DEFAULT_TIMED_INTERDICTION_S = 30.0


def apply_tolerance(counter: ToleranceCounter, drone: DroneId, protocol: int,
                    decision: Decision, threshold: int = DEFAULT_TOLERANCE_THRESHOLD,
                    timeout_s: float = DEFAULT_TIMED_INTERDICTION_S) -> Decision:
    """Override a tolerance decision with timed interdiction once ``threshold`` is exceeded."""
    if not decision.is_tolerance:
        return decision
    if counter.increment(drone, protocol) > threshold:
        return Decision.timed(timeout_s)
    return decision


class DroneFsm:
    """One FSM instance per tracked drone; events are applied in arrival order."""

    def __init__(self, drone: DroneId | None = None, state: State = S.SURVEILLANCE):
        self.drone = drone
        self.state = state
        self.history: list[tuple[State, CheckEvent, State]] = []

    def feed(self, e: CheckEvent) -> State:
        nxt = step(self.state, e)
        self.history.append((self.state, e, nxt))
        self.state = nxt
        forced = FORCED_SUCCESSORS.get(nxt)
        if forced is not None:
            auto = ev(E.AUTO)
            self.history.append((nxt, auto, forced))
            self.state = forced
        return self.state

    def feed_all(self, events: Iterable[CheckEvent]) -> State:
        for e in events:
            self.feed(e)
        return self.state

    @property
    def color(self) -> Color:
        return color(self.state)

    @property
    def trigger(self) -> int | None:
        return protocol_trigger(self.state)

    def visited(self) -> list[State]:
        if not self.history:
            return [self.state]
        return [self.history[0][0]] + [h[2] for h in self.history]
