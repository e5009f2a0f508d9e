"""The 29-case outcome table of the clarification protocols and its verifier.

``ORACLE`` is hand-transcribed from the published outcome tables (protocol 4 and
protocol 8 from their prose). :func:`enumerate_cells` exercises the engine over
every operator response, risk level, confirmation result and database fault
configuration; :func:`verify` checks every observed cell against the table.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from . import messages as m
from .clarify import (
    Authority,
    ConfirmationMode,
    RiskPolicy,
    run_protocol,
)
from .domain import DecisionKind, DroneId, GeoPoint, OperatorId, RiskLevel, TimeWindow, Zone
from .messages import OperatorResponse
from .postdetect import DroneFsm, EventKind, ev, protocol_trigger
from .registry import AccessLevel, FaultInjection, IdRecord, MissionAuthorization, Registry, Validity

D = DecisionKind
R = OperatorResponse
LOW, HIGH = RiskLevel.LOW, RiskLevel.HIGH

STOP, COMPLETE, NA = "stop", "completion", None


@dataclass(frozen=True)
class OracleCase:
    protocol: int
    case: str
    description: str
    low: DecisionKind
    high: DecisionKind
    operator_order: dict = field(default_factory=dict)  # risk -> STOP / COMPLETE / NA

    @property
    def key(self) -> tuple[int, str]:
        return (self.protocol, self.case)

    def expected(self, risk: RiskLevel) -> DecisionKind:
        return self.low if risk is LOW else self.high

    def expected_order(self, risk: RiskLevel):
        return self.operator_order.get(risk, NA)


def _fixed(p, case, desc, kind, order=NA):
    return OracleCase(p, case, desc, kind, kind, {LOW: order, HIGH: order})


def _risk(p, case, desc, low=D.TOLERATE_MISSION):
    return OracleCase(p, case, desc, low, D.TIMED_INTERDICTION, {LOW: COMPLETE, HIGH: STOP})


ORACLE: tuple[OracleCase, ...] = (
    _fixed(1, "CASE1", "No response", D.IMMEDIATE_INTERDICTION),
    _fixed(1, "CASE2", "I am not flying", D.IMMEDIATE_INTERDICTION),
    _risk(1, "CASE3", "I am already transmitting my ID", D.TOLERATE_ID_FAILURE),
    _risk(1, "CASE4", "I am not able to restore ID", D.TOLERATE_ID_FAILURE),
    _fixed(1, "CASE5", "I restored ID transmission (verified)", D.RESTORATION_CONFIRMED),
    _risk(1, "CASE6", "Unconfirmed ID restoration", D.TOLERATE_ID_FAILURE),
    _fixed(2, "CASE1", "No technical issues, security break", D.IMMEDIATE_INTERDICTION),
    _fixed(2, "CASE2", "Correct ID, issue with the ID-DB", D.TIMED_INTERDICTION, STOP),
    _fixed(2, "CASE3", "Correct ID, issues with both databases", D.TOLERATE_AUTH_FAILURE),
    _fixed(3, "CASE1", "Unresolved technical issue in ID-DB", D.TOLERATE_ID_FAILURE),
    _fixed(3, "CASE2", "Resolved technical issue in ID-DB", D.RESTORATION_CONFIRMED),
    _fixed(4, "CASE1", "No database issue found", D.TIMED_INTERDICTION, STOP),
    _fixed(4, "CASE2", "Database issue identified", D.TOLERATE_AUTH_FAILURE),
    _fixed(4, "CASE3", "Issues in both databases restored", D.RESTORATION_CONFIRMED),
    _fixed(5, "CASE1", "Unresolved technical issue in ID-DB", D.TOLERATE_ID_FAILURE),
    _fixed(5, "CASE2", "Resolved technical issue in ID-DB", D.RESTORATION_CONFIRMED),
    _fixed(6, "CASE1", "Technical issue with AUTH-DB", D.ISSUE_RESOLVED),
    OracleCase(6, "CASE2", "No technical issue, high risk", D.TIMED_INTERDICTION,
               D.TIMED_INTERDICTION, {HIGH: STOP}),
    OracleCase(6, "CASE3", "No technical issue, low risk", D.TOLERATE_MISSION,
               D.TOLERATE_MISSION, {LOW: COMPLETE}),
    _fixed(7, "CASE1", "No response", D.TIMED_INTERDICTION, STOP),
    _risk(7, "CASE2", "I am already flying in authorized area"),
    _risk(7, "CASE3", "I cannot return to authorized area"),
    _fixed(7, "CASE4", "I returned to authorized area (verified)", D.RESTORATION_CONFIRMED),
    _fixed(7, "CASE5", "Unconfirmed return to authorized area", D.TIMED_INTERDICTION, STOP),
    _fixed(8, "CASE1", "No response", D.TIMED_INTERDICTION, STOP),
    _risk(8, "CASE2", "I am not exceeding authorized flight time"),
    _risk(8, "CASE3", "I cannot stop mission"),
    _fixed(8, "CASE4", "I stopped mission (verified)", D.ISSUE_RESOLVED),
    _fixed(8, "CASE5", "Unconfirmed mission stop", D.TIMED_INTERDICTION, STOP),
)
ORACLE_BY_KEY = {c.key: c for c in ORACLE}


@dataclass(frozen=True)
class Cell:
    """One enumerated input combination and the engine's answer."""

    protocol: int
    inputs: tuple
    risk: RiskLevel
    case_label: str | None
    decision: DecisionKind | None
    operator_order: str | None
    stop_paired: bool
    nondestructive: bool = False

    @property
    def escalated(self) -> bool:
        return bool(self.case_label and ">" in self.case_label)


def _order_of(delivered) -> str | None:
    types = {e.msg_type for e in delivered if e.recipient.startswith("operator:")}
    if m.STOP_MISSION in types:
        return STOP
    if m.COMPLETE_MISSION in types:
        return COMPLETE
    return NA


def _cell(protocol, inputs, risk, result) -> Cell:
    decision = result.decision.kind if result.decision else None
    stop_paired = decision is not D.TIMED_INTERDICTION or any(
        e.msg_type == m.STOP_MISSION and e.recipient.startswith("operator:")
        for e in result.session.transcript)
    return Cell(protocol, inputs, risk, result.case_label, decision, _order_of(result.delivered),
                stop_paired, bool(result.decision and result.decision.nondestructive))


# -- operator-facing protocols ------------------------------------------------

def _operator_cells():
    for protocol in (1, 7, 8):
        for resp, risk, ok, mode in itertools.product(
                sorted(m.LEGAL_RESPONSES[protocol]), (LOW, HIGH), (True, False), ConfirmationMode):
            res = run_protocol(protocol, response=resp, risk=risk, confirm=mode, confirmed=ok,
                               diagnosis=None, authority=Authority(diagnoser=_no_diag,
                                                                   risk=RiskPolicy.constant(risk)))
            yield _cell(protocol, (resp.value, ok, mode.value), risk, res)


def _no_diag(*_):
    raise AssertionError("operator-facing protocols never consult the databases")


# -- database protocols, driven through real fault configurations ---------------

T_DETECT = 50_000
ZONE = Zone.rectangle(0.0, 0.0, 1.0, 1.0)
POS = GeoPoint(0.5, 0.5, 50.0)
OP = OperatorId.from_int(0xB2)


def build_registry(registered: bool, authorized: bool, expired: bool,
                   faults: FaultInjection, drone: DroneId) -> Registry:
    reg = Registry(faults=FaultInjection(set(faults.id_db_miss), set(faults.auth_db_miss),
                                         set(faults.stale_expiry)))
    if registered:
        reg.register_drone(IdRecord(drone, OP, expiry=T_DETECT - 1 if expired else T_DETECT * 10))
    if authorized:
        reg.add_authorization(MissionAuthorization("A-1", drone, OP, TimeWindow(0, T_DETECT * 2), ZONE))
    return reg


def cuas_view_protocol(reg: Registry, drone: DroneId, t: int, pos: GeoPoint) -> int | None:
    """Walk the FSM as a CUAS would with the (possibly faulted) database view."""
    fsm = DroneFsm(drone)
    fsm.feed(ev(EventKind.OBJECT_CLASSIFIED_AS_DRONE))
    fsm.feed(ev(EventKind.RID_RECEIVED))
    fsm.feed(ev(EventKind.AUTHENTICITY_OK))
    view = reg.lookup_id(drone, AccessLevel.OFFICIALS)
    fsm.feed(ev(EventKind.ID_DB_HIT if view else EventKind.ID_DB_MISS))
    if view is not None:
        fsm.feed(ev(EventKind.ID_VALID if t < view.expiry else EventKind.ID_EXPIRED))
    auth = reg.find_authorization(drone, t, pos)
    fsm.feed(ev(EventKind.AUTH_DB_HIT if auth else EventKind.AUTH_DB_MISS))
    if fsm.trigger is None and auth is not None:
        fsm.feed(ev(EventKind.AREA_OK))
        fsm.feed(ev(EventKind.TIME_OK))
    return protocol_trigger(fsm.state)


def requery_ok(reg: Registry, protocol: int, drone: DroneId, t: int, pos: GeoPoint) -> bool:
    if protocol == 3:
        return reg.lookup_id(drone, AccessLevel.OFFICIALS) is not None
    valid = reg.check_validity(drone, t) is Validity.VALID
    if protocol == 4:
        return valid and reg.find_authorization(drone, t, pos) is not None
    return valid


def _subsets(items):
    for r in range(len(items) + 1):
        yield from itertools.combinations(items, r)


def fault_configurations():
    """(registered, authorized, expired, faults at detection, faults cleared before diagnosis)."""
    kinds = FaultInjection.KINDS
    for registered, authorized, expired in itertools.product((True, False), repeat=3):
        if expired and not registered:
            continue
        for active in _subsets(kinds):
            for cleared in _subsets(active):
                yield registered, authorized, expired, active, cleared


def _database_cells():
    drone = DroneId("D-FAULT")
    for registered, authorized, expired, active, cleared in fault_configurations():
        faults = FaultInjection(**{k: ({drone} if k in active else set()) for k in FaultInjection.KINDS})
        for risk in (LOW, HIGH):
            reg = build_registry(registered, authorized, expired, faults, drone)
            protocol = cuas_view_protocol(reg, drone, T_DETECT, POS)
            if protocol is None or protocol not in (2, 3, 4, 5, 6):
                continue
            for k in cleared:
                reg.set_fault(k, drone, False)
            authority = Authority(reg, risk=RiskPolicy.constant(risk))
            res = run_protocol(protocol, drone=drone, operator=None, registry=reg,
                               authority=authority, position=POS, t0=T_DETECT,
                               confirmed=lambda p=protocol: requery_ok(reg, p, drone, T_DETECT, POS))
            inputs = (registered, authorized, expired, tuple(active), tuple(cleared))
            yield _cell(protocol, inputs, risk, res)


def enumerate_cells() -> list[Cell]:
    return list(_operator_cells()) + list(_database_cells())


@dataclass
class CaseVerdict:
    case: OracleCase
    observed: int
    mismatches: list[str]

    @property
    def passed(self) -> bool:
        return self.observed > 0 and not self.mismatches

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        detail = f"{self.observed} cells" if self.passed else (
            "; ".join(self.mismatches[:3]) or "never observed")
        return (f"{status} P{self.case.protocol} {self.case.case:<5} "
                f"{self.case.description} [{detail}]")


def verify(cells: list[Cell] | None = None) -> tuple[list[CaseVerdict], list[str]]:
    """Return one verdict per oracle case plus problems with non-oracle cells."""
    cells = enumerate_cells() if cells is None else cells
    verdicts = {c.key: CaseVerdict(c, 0, []) for c in ORACLE}
    problems = []
    for cell in cells:
        if cell.decision is None or cell.case_label is None:
            problems.append(f"undecided cell P{cell.protocol} {cell.inputs}")
            continue
        if not cell.stop_paired:
            problems.append(f"timed interdiction without STOP MISSION: P{cell.protocol} {cell.inputs}")
        if cell.escalated:
            continue
        v = verdicts.get((cell.protocol, cell.case_label))
        if v is None:
            problems.append(f"unknown case P{cell.protocol} {cell.case_label}")
            continue
        v.observed += 1
        want = v.case.expected(cell.risk)
        if cell.decision is not want:
            v.mismatches.append(f"{cell.inputs}/{cell.risk.value}: {cell.decision.value} != {want.value}")
        order = v.case.expected_order(cell.risk)
        if cell.operator_order != order:
            v.mismatches.append(f"{cell.inputs}/{cell.risk.value}: operator order "
                                f"{cell.operator_order} != {order}")
        if (cell.protocol, cell.case_label) == (2, "CASE1") and not cell.nondestructive:
            v.mismatches.append("security-break interdiction must request non-destroying technology")
    return list(verdicts.values()), problems
