"""The eight clarification protocols, run by the authority as correlated sessions.

:class:`Authority` is transport-free: :meth:`Authority.dispatch` takes one inbound
envelope and the current time and returns the outbound envelopes, each stamped
with the time it should leave the authority. Waiting for an operator or for a
CUAS confirmation is bounded by a self-addressed ``TIMER`` envelope, so every
session terminates under any responder behaviour.

``run_protocol`` and the ``run_protocolN`` wrappers drive one session to its
decision with scripted CUAS and operator behaviour; they share the authority's
code path and serve as the case oracle.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping

from . import messages as m
from .domain import (
    Decision,
    DecisionKind,
    DroneId,
    GeoPoint,
    OperatorId,
    RiskLevel,
)
from .messages import Envelope, OperatorResponse
from .postdetect import DEFAULT_TOLERANCE_THRESHOLD, ToleranceCounter, apply_tolerance
from .registry import AccessLevel, Registry, Validity

R = OperatorResponse
D = DecisionKind


class ProtocolError(Exception):
    """Base for errors the authority reports back to the sender."""


class UnknownCorrelation(ProtocolError):
    pass


class DuplicateOpen(ProtocolError):
    pass


class IllegalResponse(ProtocolError):
    pass


class ConfirmationMode(str, enum.Enum):
    EXPLICIT = "Explicit"
    IMPLICIT = "Implicit"


class Stage(str, enum.Enum):
    AWAIT_OPERATOR = "await_operator"
    AWAIT_CONFIRM = "await_confirm"
    DECIDED = "decided"


@dataclass(frozen=True)
class RiskPolicy:
    """Scripted mapping (mission criticality, zone criticality, emergency) -> risk.

    Keys may use ``"*"`` for either tag; exact matches win over wildcards.
    """

    table: Mapping[tuple[str, str, bool], RiskLevel] = field(default_factory=dict)
    default: RiskLevel = RiskLevel.LOW

    @classmethod
    def constant(cls, level: RiskLevel) -> RiskPolicy:
        return cls({}, level)

    def assess(self, mission: str, zone: str, emergency: bool) -> RiskLevel:
        for key in ((mission, zone, emergency), (mission, "*", emergency),
                    ("*", zone, emergency), ("*", "*", emergency)):
            if key in self.table:
                return self.table[key]
        return self.default

    def to_json(self) -> dict:
        return {
            "default": self.default.value,
            "rules": [{"mission": k[0], "zone": k[1], "emergency": k[2], "risk": v.value}
                      for k, v in self.table.items()],
        }

    @classmethod
    def from_json(cls, d: dict | None) -> RiskPolicy:
        d = d or {}
        table = {(r.get("mission", "*"), r.get("zone", "*"), bool(r.get("emergency", False))):
                 RiskLevel(r["risk"]) for r in d.get("rules", [])}
        return cls(table, RiskLevel(d.get("default", "Low")))


@dataclass(frozen=True)
class Diagnosis:
    """What the authority learns by checking the databases without fault masking."""

    registered: bool = True
    authorized: bool = False
    expired: bool = False
    id_db_fault: bool = False
    auth_db_fault: bool = False
    stale_expiry: bool = False


def diagnose(registry: Registry, drone: DroneId, t: int, position: GeoPoint | None) -> Diagnosis:
    registered = registry.lookup_id(drone, AccessLevel.AUTHORITY, raw=True) is not None
    if position is not None:
        authorized = registry.find_authorization(drone, t, position, raw=True) is not None
    else:
        authorized = registry.find_authorization_any(drone, t, raw=True) is not None
    f = registry.faults
    return Diagnosis(
        registered=registered,
        authorized=authorized,
        expired=registry.check_validity(drone, t, raw=True) is Validity.EXPIRED,
        id_db_fault=drone in f.id_db_miss,
        auth_db_fault=drone in f.auth_db_miss,
        stale_expiry=drone in f.stale_expiry,
    )


# -- per-protocol diagnosis rules ------------------------------------------
# Each returns (case label, decision kind or "confirm"); risk-dependent cells
# return "risk" and are resolved by the caller.

CONFIRM = "confirm"
RISK = "risk"


def protocol2_case(d: Diagnosis) -> tuple[str, str | DecisionKind]:
    if not d.registered:
        return "CASE1", D.IMMEDIATE_INTERDICTION
    if d.authorized and d.auth_db_fault:
        return "CASE3", D.TOLERATE_AUTH_FAILURE
    return "CASE2", D.TIMED_INTERDICTION


def protocol3_case(d: Diagnosis) -> tuple[str, str | DecisionKind] | None:
    """``None`` means the ID is truly unregistered: escalate to unknown-ID handling."""
    if not d.registered:
        return None
    if d.id_db_fault:
        return "CASE1", D.TOLERATE_ID_FAILURE
    return "CASE2", CONFIRM


def protocol4_case(d: Diagnosis) -> tuple[str, str | DecisionKind]:
    was_faulty = (not d.expired) or d.authorized
    if not was_faulty:
        return "CASE1", D.TIMED_INTERDICTION
    if d.stale_expiry or (d.authorized and d.auth_db_fault):
        return "CASE2", D.TOLERATE_AUTH_FAILURE
    return "CASE3", CONFIRM


def protocol5_case(d: Diagnosis) -> tuple[str, str | DecisionKind]:
    if d.stale_expiry or d.expired:
        return "CASE1", D.TOLERATE_ID_FAILURE
    return "CASE2", CONFIRM


def protocol6_case(d: Diagnosis) -> tuple[str, str | DecisionKind]:
    if d.authorized:
        return "CASE1", D.ISSUE_RESOLVED
    return "", RISK


RESPONSE_CASES = {
    1: {R.NO_RESPONSE: "CASE1", R.NOT_FLYING: "CASE2", R.ALREADY_TRANSMITTING: "CASE3",
        R.CANNOT_RESTORE: "CASE4", R.RESTORED_ID: "CASE5"},
    7: {R.NO_RESPONSE: "CASE1", R.ALREADY_IN_AUTHORIZED_AREA: "CASE2", R.CANNOT_RETURN: "CASE3",
        R.RETURNED_TO_AREA: "CASE4"},
    8: {R.NO_RESPONSE: "CASE1", R.NOT_EXCEEDING_TIME: "CASE2", R.CANNOT_STOP: "CASE3",
        R.STOPPED_MISSION: "CASE4"},
}
UNCONFIRMED_CASE = {1: "CASE6", 7: "CASE5", 8: "CASE5"}
TOLERANCE_FOR = {1: D.TOLERATE_ID_FAILURE, 6: D.TOLERATE_MISSION, 7: D.TOLERATE_MISSION,
                 8: D.TOLERATE_MISSION}
CONFIRMED_DECISION = {1: D.RESTORATION_CONFIRMED, 3: D.RESTORATION_CONFIRMED,
                      4: D.RESTORATION_CONFIRMED, 5: D.RESTORATION_CONFIRMED,
                      7: D.RESTORATION_CONFIRMED, 8: D.ISSUE_RESOLVED}
# operator is told to complete the mission when tolerated in these protocols
OPERATOR_FACING = frozenset({1, 6, 7, 8})


def cuas_label(protocol: int, decision: Decision) -> str:
    k = decision.kind
    if k is D.IMMEDIATE_INTERDICTION:
        return "INTERDICT IMMEDIATELY" if protocol == 1 else "IMMEDIATE INTERDICTION AUTHORIZATION"
    if k is D.TIMED_INTERDICTION:
        return "TIMED INTERDICTION AUTHORIZATION" if protocol == 4 else "INTERDICT AFTER TIME-OUT"
    if k is D.TOLERATE_ID_FAILURE:
        return "TOLERATE EXPIRED ID" if protocol == 5 else "TOLERATE ID FAILURE"
    if k is D.TOLERATE_AUTH_FAILURE:
        return "TOLERATE AUTH FAILURE"
    if k is D.TOLERATE_MISSION:
        return "TOLERATE MISSION"
    if k is D.ISSUE_RESOLVED and protocol == 6:
        return "AUTH-DB MISS RESOLVED"
    if k is D.CANCELLED:
        return "SESSION CANCELLED"
    return m.verified_label(protocol)


DRONE_LOST = "DRONE LOST"


@dataclass
class ProtocolSession:
    session_id: str
    protocol: int
    drone_id: DroneId
    cuas_id: str
    operator_id: OperatorId | None
    opened_at: int
    decided_at: int | None = None
    case_label: str | None = None
    outcome: Decision | None = None
    transcript: list[Envelope] = field(default_factory=list)
    # engine state
    stage: Stage = Stage.AWAIT_OPERATOR
    stage_token: int = 0
    open_payload: dict = field(default_factory=dict)
    pending_case: str | None = None
    escalated_from: str | None = None

    @property
    def confirm_mode(self) -> ConfirmationMode:
        return ConfirmationMode(self.open_payload.get("confirm", "Explicit"))

    def summary(self) -> dict:
        return {
            "session_id": self.session_id,
            "protocol": self.protocol,
            "drone_id": self.drone_id.value,
            "cuas_id": self.cuas_id,
            "operator_id": self.operator_id.hex() if self.operator_id else None,
            "opened_at": self.opened_at,
            "decided_at": self.decided_at,
            "case_label": self.case_label,
            "outcome": self.outcome.to_json() if self.outcome else None,
            "messages": len(self.transcript),
        }


@dataclass
class AuthorityConfig:
    operator_timeout_ms: int = 10_000
    confirm_timeout_ms: int = 10_000
    implicit_window_ms: int = 3_000
    timed_interdiction_s: float = 30.0
    tolerance_threshold: int = DEFAULT_TOLERANCE_THRESHOLD
    # latency added to every reply; runs in parallel across sessions
    processing_ms: int = 0
    # serialized share of processing: the authority's contention model
    service_ms: int = 0
    db_check_ms: int = 0
    risk_ms: int = 0
    fast_risk_ms: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


def _no_databases(drone: DroneId, t: int, position: GeoPoint | None) -> Diagnosis:
    raise ProtocolError("this authority has neither a registry nor a diagnoser")


class Authority:
    """Authority-side session engine; see the module docstring."""

    def __init__(self, registry: Registry | None = None,
                 config: AuthorityConfig | None = None,
                 risk: RiskPolicy | None = None,
                 diagnoser: Callable[[DroneId, int, GeoPoint | None], Diagnosis] | None = None,
                 mission_criticality: Mapping[str, str] | None = None,
                 repair: Callable[[str, DroneId], None] | None = None,
                 address: str = str(m.AUTHORITY)):
        self.registry = registry
        self.config = config or AuthorityConfig()
        self.risk = risk or RiskPolicy()
        self.mission_criticality = dict(mission_criticality or {})
        if diagnoser is None:
            diagnoser = _no_databases if registry is None else \
                (lambda d, t, p: diagnose(registry, d, t, p))
        self.diagnoser = diagnoser
        if repair is None and registry is not None:
            repair = lambda kind, d: registry.set_fault(kind, d, False)  # noqa: E731
        self.repair = repair
        self.address = address
        self.sessions: dict[str, ProtocolSession] = {}
        self.active: dict[tuple[DroneId, int], str] = {}
        self.tolerance = ToleranceCounter()
        self.audit: list[dict] = []
        self._ids = m.IdSource(address)
        self._busy_until = 0

    # -- public ------------------------------------------------------------

    def dispatch(self, env: Envelope, now: int) -> list[Envelope]:
        if env.recipient != self.address:
            raise m.MalformedEnvelope(f"envelope addressed to {env.recipient}")
        if env.msg_type == m.TIMER:
            return self._on_timer(env, now)
        start = max(now, self._busy_until)
        self._busy_until = start + self.config.service_ms
        t = self._busy_until + self.config.processing_ms
        mt = env.msg_type
        if mt in m.PROTOCOL_OF_OPEN:
            return self._on_open(env, now, t)
        if mt == m.INTERDICTION_REPORT:
            return self._on_report(env, t)
        if mt in m.RESPONSE_OF_LABEL:
            return self._on_response(env, t)
        if mt in m.CONFIRM_REPLIES:
            return self._on_confirm(env, t, m.CONFIRM_REPLIES[mt])
        if mt == DRONE_LOST:
            return self._on_lost(env, t)
        raise m.MalformedEnvelope(f"unexpected message type {mt!r}")

    def session(self, session_id: str) -> ProtocolSession:
        try:
            return self.sessions[session_id]
        except KeyError:
            raise UnknownCorrelation(session_id) from None

    def open_sessions(self) -> list[ProtocolSession]:
        return [s for s in self.sessions.values() if s.decided_at is None]

    # -- helpers -----------------------------------------------------------

    def _env(self, s: ProtocolSession, recipient: str, msg_type: str, at: int,
             payload: dict | None = None) -> Envelope:
        e = Envelope(self._ids(), s.session_id, self.address, recipient, msg_type, at,
                     payload or {})
        s.transcript.append(e)
        return e

    def _timer(self, s: ProtocolSession, kind: str, at: int) -> Envelope:
        s.stage_token += 1
        return self._env(s, self.address, m.TIMER, at, {"kind": kind, "token": s.stage_token})

    def _operator_addr(self, s: ProtocolSession) -> str | None:
        if s.operator_id is None:
            return None
        return str(m.operator_agent(s.operator_id.hex()))

    def _risk(self, s: ProtocolSession) -> RiskLevel:
        p = s.open_payload
        mission = self.mission_criticality.get(
            p.get("auth_id") or "", self.mission_criticality.get(s.drone_id.value, "routine"))
        return self.risk.assess(mission, p.get("zone_criticality", "normal"),
                                bool(p.get("emergency", False)))

    def _risk_decision(self, s: ProtocolSession, fast: bool) -> tuple[DecisionKind, int]:
        delay = self.config.fast_risk_ms if fast else self.config.risk_ms
        if self._risk(s) is RiskLevel.LOW:
            return TOLERANCE_FOR.get(s.protocol, D.TOLERATE_MISSION), delay
        return D.TIMED_INTERDICTION, delay

    def _diagnosis(self, s: ProtocolSession) -> Diagnosis:
        p = s.open_payload
        pos = p.get("position")
        point = GeoPoint(*pos) if pos is not None else None
        return self.diagnoser(s.drone_id, int(p.get("time", s.opened_at)), point)

    # -- inbound handlers -------------------------------------------------

    def _on_open(self, env: Envelope, now: int, t: int) -> list[Envelope]:
        protocol = m.PROTOCOL_OF_OPEN[env.msg_type]
        p = env.payload
        try:
            drone = DroneId(p["drone_id"])
        except (KeyError, ValueError, TypeError):
            raise m.MalformedEnvelope("open message needs a valid drone_id") from None
        existing = self.sessions.get(env.correlation_id)
        if existing is not None:
            existing.transcript.append(env)
            if existing.decided_at is None and existing.stage is Stage.AWAIT_CONFIRM:
                # repeated report while a claim is being verified invalidates it
                return self._unconfirmed(existing, t)
            if existing.decided_at is not None:
                return []
            raise DuplicateOpen(env.correlation_id)
        active_id = self.active.get((drone, protocol))
        if active_id is not None:
            active = self.sessions[active_id]
            if active.stage is Stage.AWAIT_CONFIRM:
                return self._unconfirmed(active, t)
            raise DuplicateOpen(f"{drone.value} already in protocol {protocol} ({active_id})")

        op = p.get("operator_id")
        operator = OperatorId.from_hex(op) if op else None
        if operator is None and self.registry is not None:
            operator = self.registry.operator_of(drone)
        s = ProtocolSession(env.correlation_id, protocol, drone, env.sender, operator,
                            opened_at=now, open_payload=dict(p))
        s.transcript.append(env)
        self.sessions[s.session_id] = s
        self.active[(drone, protocol)] = s.session_id

        if protocol in m.OPERATOR_QUERY:
            out = [self._env(s, self._operator_addr(s) or "operator:?", m.OPERATOR_QUERY[protocol], t,
                             {"drone_id": drone.value, "protocol": protocol})]
            out.append(self._timer(s, "operator", t + self.config.operator_timeout_ms))
            s.stage = Stage.AWAIT_OPERATOR
            return out
        return self._diagnose_and_decide(s, t + self.config.db_check_ms)

    def _diagnose_and_decide(self, s: ProtocolSession, t: int) -> list[Envelope]:
        d = self._diagnosis(s)
        proto = s.protocol
        if proto == 2:
            case, action = protocol2_case(d)
        elif proto == 3:
            res = protocol3_case(d)
            if res is None:
                return self._escalate(s, 2, "CASE1", t, d)
            case, action = res
        elif proto == 4:
            case, action = protocol4_case(d)
        elif proto == 5:
            case, action = protocol5_case(d)
        elif proto == 6:
            case, action = protocol6_case(d)
            if action == RISK:
                kind, delay = self._risk_decision(s, fast=False)
                case = "CASE3" if kind is not D.TIMED_INTERDICTION else "CASE2"
                return self._decide(s, case, kind, t + delay)
            if self.repair is not None and d.auth_db_fault:
                self.repair("auth_db_miss", s.drone_id)
        else:  # pragma: no cover - guarded by caller
            raise AssertionError(proto)
        if action == CONFIRM:
            return self._request_confirmation(s, case, t)
        return self._decide(s, case, action, t)

    def _escalate(self, s: ProtocolSession, target: int, from_case: str, t: int,
                  d: Diagnosis | None = None) -> list[Envelope]:
        d = d or self._diagnosis(s)
        if target == 2:
            case, kind = protocol2_case(d)
        else:
            case, kind = protocol4_case(d)
            if kind == CONFIRM:
                # the restoration was just contradicted: treat as a live fault
                case, kind = "CASE2", D.TOLERATE_AUTH_FAILURE
        s.escalated_from = from_case
        return self._decide(s, f"{from_case}>P{target}:{case}", kind, t)

    def _request_confirmation(self, s: ProtocolSession, case: str, t: int) -> list[Envelope]:
        s.stage = Stage.AWAIT_CONFIRM
        s.pending_case = case
        out = [self._env(s, s.cuas_id, m.confirm_request(s.protocol), t,
                         {"drone_id": s.drone_id.value, "protocol": s.protocol, "case": case})]
        if s.protocol == 1 and self._operator_addr(s):
            out.append(self._env(s, self._operator_addr(s), m.VERIFICATION_PENDING, t,
                                 {"drone_id": s.drone_id.value}))
        if s.confirm_mode is ConfirmationMode.IMPLICIT:
            out.append(self._timer(s, "implicit", t + self.config.implicit_window_ms))
        else:
            out.append(self._timer(s, "confirm", t + self.config.confirm_timeout_ms))
        return out

    def _confirmed(self, s: ProtocolSession, t: int) -> list[Envelope]:
        return self._decide(s, s.pending_case or "CASE?", CONFIRMED_DECISION[s.protocol], t)

    def _unconfirmed(self, s: ProtocolSession, t: int) -> list[Envelope]:
        p = s.protocol
        if p == 1:
            kind, delay = self._risk_decision(s, fast=True)
            return self._decide(s, "CASE6", kind, t + delay)
        if p in (7, 8):
            return self._decide(s, UNCONFIRMED_CASE[p], D.TIMED_INTERDICTION, t)
        if p == 3:
            return self._escalate(s, 2, s.pending_case or "CASE2", t)
        if p == 4:
            return self._decide(s, f"{s.pending_case}>CASE2", D.TOLERATE_AUTH_FAILURE, t)
        return self._escalate(s, 4, s.pending_case or "CASE2", t)

    def _on_response(self, env: Envelope, t: int) -> list[Envelope]:
        s = self.session(env.correlation_id)
        s.transcript.append(env)
        resp = m.RESPONSE_OF_LABEL[env.msg_type]
        legal = m.LEGAL_RESPONSES.get(s.protocol, frozenset())
        if resp not in legal:
            raise IllegalResponse(f"{env.msg_type!r} is not a legal answer in protocol {s.protocol}")
        if s.decided_at is not None or s.stage is not Stage.AWAIT_OPERATOR:
            return []  # late answer after timeout or decision
        return self._handle_response(s, resp, t)

    def _handle_response(self, s: ProtocolSession, resp: OperatorResponse, t: int) -> list[Envelope]:
        case = RESPONSE_CASES[s.protocol][resp]
        p = s.protocol
        if case == "CASE1":
            kind = D.IMMEDIATE_INTERDICTION if p == 1 else D.TIMED_INTERDICTION
            return self._decide(s, case, kind, t)
        if case == "CASE2" and p == 1:
            return self._decide(s, case, D.IMMEDIATE_INTERDICTION, t)
        if case == "CASE4" and p in (7, 8) or case == "CASE5" and p == 1:
            return self._request_confirmation(s, case, t)
        kind, delay = self._risk_decision(s, fast=p in (7, 8))
        return self._decide(s, case, kind, t + delay)

    def _on_confirm(self, env: Envelope, t: int, ok: bool) -> list[Envelope]:
        s = self.session(env.correlation_id)
        s.transcript.append(env)
        if s.decided_at is not None or s.stage is not Stage.AWAIT_CONFIRM:
            return []
        return self._confirmed(s, t) if ok else self._unconfirmed(s, t)

    def _on_timer(self, env: Envelope, now: int) -> list[Envelope]:
        s = self.session(env.correlation_id)
        if s.decided_at is not None or env.payload.get("token") != s.stage_token:
            return []
        kind = env.payload.get("kind")
        t = now + self.config.processing_ms
        if kind == "operator":
            return self._handle_response(s, R.NO_RESPONSE, t)
        if kind == "implicit":
            return self._confirmed(s, t)
        if kind == "confirm":
            return self._unconfirmed(s, t)
        raise m.MalformedEnvelope(f"unknown timer kind {kind!r}")

    def _on_lost(self, env: Envelope, t: int) -> list[Envelope]:
        s = self.session(env.correlation_id)
        s.transcript.append(env)
        if s.decided_at is not None:
            return []
        return self._decide(s, "CANCELLED", D.CANCELLED, t, apply_policy=False)

    def _on_report(self, env: Envelope, t: int) -> list[Envelope]:
        record = {"type": "interdiction_report", "at": t, "from": env.sender,
                  "correlation_id": env.correlation_id, **env.payload}
        self.audit.append(record)
        out = Envelope(self._ids(), env.correlation_id, self.address, str(m.COURT), m.LAWSUIT, t,
                       {"drone_id": env.payload.get("drone_id"), "report": env.msg_id})
        s = self.sessions.get(env.correlation_id)
        if s is not None:
            s.transcript.append(env)
            s.transcript.append(out)
        return [out]

    # -- decisions ----------------------------------------------------------

    def _decide(self, s: ProtocolSession, case: str, kind: DecisionKind, t: int,
                apply_policy: bool = True) -> list[Envelope]:
        cfg = self.config
        decision = Decision.timed(cfg.timed_interdiction_s) if kind is D.TIMED_INTERDICTION \
            else Decision.immediate(nondestructive=(s.protocol == 2 and case == "CASE1")) \
            if kind is D.IMMEDIATE_INTERDICTION else Decision(kind)
        if apply_policy:
            decision = apply_tolerance(self.tolerance, s.drone_id, s.protocol, decision,
                                       cfg.tolerance_threshold, cfg.timed_interdiction_s)
        s.stage = Stage.DECIDED
        s.stage_token += 1
        s.decided_at = t
        s.case_label = case
        s.outcome = decision
        self.active.pop((s.drone_id, s.protocol), None)

        payload = {"drone_id": s.drone_id.value, "protocol": s.protocol, "case": case,
                   "decision": decision.to_json()}
        out = []
        op = self._operator_addr(s)
        if decision.kind is D.TIMED_INTERDICTION and op:
            out.append(self._env(s, op, m.STOP_MISSION, t, {"drone_id": s.drone_id.value}))
        elif decision.is_tolerance and s.protocol in OPERATOR_FACING and op:
            out.append(self._env(s, op, m.COMPLETE_MISSION, t, {"drone_id": s.drone_id.value}))
        out.append(self._env(s, s.cuas_id, cuas_label(s.protocol, decision), t, payload))
        if decision.is_interdiction:
            record = {"type": "interdiction_authorized", "at": t, "session_id": s.session_id,
                      "protocol": s.protocol, "case": case, "drone_id": s.drone_id.value,
                      "decision": decision.to_json()}
            self.audit.append(record)
            out.append(self._env(s, str(m.COURT), m.INTERDICTION_AUTHORIZED, t, record))
        return out


# -- scripted single-session driver ------------------------------------------

@dataclass
class ProtocolResult:
    case_label: str
    decision: Decision
    session: ProtocolSession
    delivered: list[Envelope]

    def as_tuple(self) -> tuple[str, Decision]:
        return self.case_label, self.decision


CUAS_ADDR = str(m.cuas_agent(0))
DEFAULT_OPERATOR = OperatorId.from_int(0xA1)


def run_protocol(protocol: int, *,
                 drone: DroneId | str = "D-0001",
                 operator: OperatorId | None = DEFAULT_OPERATOR,
                 response: OperatorResponse = R.NO_RESPONSE,
                 diagnosis: Diagnosis | None = None,
                 registry: Registry | None = None,
                 risk: RiskPolicy | RiskLevel = RiskLevel.LOW,
                 confirm: ConfirmationMode = ConfirmationMode.EXPLICIT,
                 confirmed: bool | Callable[[], bool] = True,
                 config: AuthorityConfig | None = None,
                 authority: Authority | None = None,
                 position: GeoPoint | None = None,
                 t0: int = 0) -> ProtocolResult:
    """Run one protocol session to its decision with scripted counterparts.

    The operator answers the authority's query with ``response`` (silence for
    ``NoResponse``). The CUAS answers a confirmation request with ``confirmed``,
    explicitly or, in implicit mode, by re-reporting the drone when unconfirmed.
    """
    drone = drone if isinstance(drone, DroneId) else DroneId(drone)
    if isinstance(risk, RiskLevel):
        risk = RiskPolicy.constant(risk)
    if authority is None:
        if diagnosis is not None:
            authority = Authority(registry, config, risk, diagnoser=lambda *_: diagnosis,
                                  repair=(lambda *_: None) if registry is None else None)
        else:
            authority = Authority(registry, config, risk)
    sid = f"{CUAS_ADDR}/s{len(authority.sessions) + 1}"
    payload = {"drone_id": drone.value, "time": t0, "confirm": confirm.value}
    if position is not None:
        payload["position"] = [position.lat, position.lon, position.alt]
    if operator is not None:
        payload["operator_id"] = operator.hex()
    ids = m.IdSource(sid)
    open_env = Envelope(ids(), sid, CUAS_ADDR, authority.address, m.OPEN_LABELS[protocol], t0, payload)

    seq = itertools.count()
    queue: list[tuple[int, int, Envelope]] = [(t0, next(seq), open_env)]
    delivered: list[Envelope] = []
    while queue:
        now, _, env = heapq.heappop(queue)
        delivered.append(env)
        replies: list[Envelope] = []
        if env.recipient == authority.address:
            replies = authority.dispatch(env, now)
        elif env.recipient == CUAS_ADDR:
            replies = _scripted_cuas(env, now, ids, open_env, confirm, confirmed)
        elif env.recipient.startswith("operator:") and env.msg_type == m.OPERATOR_QUERY.get(protocol):
            if response is not R.NO_RESPONSE:
                replies = [Envelope(f"{env.recipient}/{sid}#1", sid, env.recipient, authority.address,
                                    m.RESPONSE_LABELS[response], now, {"drone_id": drone.value})]
        for r in replies:
            heapq.heappush(queue, (max(r.sent_at, now), next(seq), r))
    s = authority.sessions[sid]
    return ProtocolResult(s.case_label, s.outcome, s, delivered)


def _scripted_cuas(env, now, ids, open_env, confirm, confirmed) -> list[Envelope]:
    if env.msg_type in m.CONFIRM_REQUESTS:
        ok = confirmed() if callable(confirmed) else confirmed
        if confirm is ConfirmationMode.EXPLICIT:
            proto = env.payload["protocol"]
            return [Envelope(ids(), env.correlation_id, CUAS_ADDR, env.sender,
                             m.confirm_reply(proto, ok), now, {})]
        if not ok:
            return [Envelope(ids(), env.correlation_id, CUAS_ADDR, env.sender,
                             open_env.msg_type, now, open_env.payload)]
        return []
    if env.payload.get("decision", {}).get("kind") == D.IMMEDIATE_INTERDICTION.value:
        return [Envelope(ids(), env.correlation_id, CUAS_ADDR, env.sender, m.INTERDICTION_REPORT,
                         now, {"drone_id": env.payload["drone_id"]})]
    return []


def run_protocol1(potential_operator: OperatorId, response: OperatorResponse,
                  risk: RiskPolicy | RiskLevel = RiskLevel.LOW,
                  confirm: ConfirmationMode = ConfirmationMode.EXPLICIT,
                  restored: bool = True, **kw) -> tuple[str, Decision]:
    return run_protocol(1, operator=potential_operator, response=response, risk=risk,
                        confirm=confirm, confirmed=restored, **kw).as_tuple()


def run_protocol2(diagnosis: Diagnosis, **kw) -> tuple[str, Decision]:
    return run_protocol(2, diagnosis=diagnosis, **kw).as_tuple()


def run_protocol3(diagnosis: Diagnosis, requery_hit: bool | Callable[[], bool] = True,
                  **kw) -> tuple[str, Decision]:
    return run_protocol(3, diagnosis=diagnosis, confirmed=requery_hit, **kw).as_tuple()


def run_protocol4(diagnosis: Diagnosis, requery_ok: bool | Callable[[], bool] = True,
                  **kw) -> tuple[str, Decision]:
    return run_protocol(4, diagnosis=diagnosis, confirmed=requery_ok, **kw).as_tuple()


def run_protocol5(diagnosis: Diagnosis, requery_valid: bool | Callable[[], bool] = True,
                  **kw) -> tuple[str, Decision]:
    return run_protocol(5, diagnosis=diagnosis, confirmed=requery_valid, **kw).as_tuple()


def run_protocol6(diagnosis: Diagnosis, risk: RiskPolicy | RiskLevel = RiskLevel.LOW,
                  **kw) -> tuple[str, Decision]:
    return run_protocol(6, diagnosis=diagnosis, risk=risk, **kw).as_tuple()


def run_protocol7(response: OperatorResponse, risk: RiskPolicy | RiskLevel = RiskLevel.LOW,
                  confirm: ConfirmationMode = ConfirmationMode.EXPLICIT,
                  back_in_area: bool = True, **kw) -> tuple[str, Decision]:
    return run_protocol(7, response=response, risk=risk, confirm=confirm,
                        confirmed=back_in_area, **kw).as_tuple()


def run_protocol8(response: OperatorResponse, risk: RiskPolicy | RiskLevel = RiskLevel.LOW,
                  confirm: ConfirmationMode = ConfirmationMode.EXPLICIT,
                  rid_ceased: bool = True, **kw) -> tuple[str, Decision]:
    return run_protocol(8, response=response, risk=risk, confirm=confirm,
                        confirmed=rid_ceased, **kw).as_tuple()
