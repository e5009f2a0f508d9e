"""Sans-IO agents: each consumes one envelope and returns the envelopes it emits.

Outbound ``sent_at`` is the planned emission time, so local processing delay is
expressed by post-dating the reply rather than by sleeping.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .. import messages as m
from ..clarify import DRONE_LOST, Authority, ConfirmationMode
from ..domain import (
    DecisionKind, DroneId, GeoPoint, OperatorId, RemoteIdMessage, Zone, point_in_zone,
)
from ..messages import Envelope, OperatorResponse
from ..postdetect import DroneFsm, EventKind, CheckEvent, State, ev, protocol_trigger
from ..registry import AccessLevel, Registry, Validity
from .transport import DelayModel, Dist

E = EventKind
D = DecisionKind

DETECT, VERIFY, RECHECK, LOST = "detect", "verify", "recheck", "lost"
RESTING = frozenset({State.COMPLIANT, State.TOLERATE_ID_FAILURE, State.TOLERATE_AUTH_FAILURE})


# -- authority and court ---------------------------------------------------------

class AuthorityAgent:
    def __init__(self, authority: Authority):
        self.authority = authority
        self.address = authority.address

    def handle(self, env: Envelope, now: int) -> list[Envelope]:
        return self.authority.dispatch(env, now)


class CourtAgent:
    """Audit sink for interdiction authorizations and lawsuits."""

    def __init__(self, address: str = str(m.COURT)):
        self.address = address
        self.records: list[dict] = []

    def handle(self, env: Envelope, now: int) -> list[Envelope]:
        self.records.append({"received_at": now, "msg_type": env.msg_type,
                             "correlation_id": env.correlation_id, **env.payload})
        return []


# -- operator ------------------------------------------------------------------

@dataclass
class OperatorScript:
    """Reply per incoming authority message type: ``msg_type -> (response, think time)``."""

    replies: dict[str, tuple[OperatorResponse, Dist]] = field(default_factory=dict)

    @classmethod
    def answering(cls, response: OperatorResponse, think: Dist | int = 0,
                  protocols=(1, 7, 8)) -> OperatorScript:
        think = think if isinstance(think, Dist) else Dist(think)
        return cls({m.OPERATOR_QUERY[p]: (response, think) for p in protocols})

    @classmethod
    def silent(cls) -> OperatorScript:
        return cls()


class OperatorAgent:
    def __init__(self, operator_id: OperatorId, script: OperatorScript, seed: int = 0):
        self.operator_id = operator_id
        self.address = str(m.operator_agent(operator_id.hex()))
        self.script = script
        self.rng = random.Random(f"{seed}:{self.address}")
        self.received: list[tuple[int, str, str]] = []
        self._ids = m.IdSource(self.address)

    def handle(self, env: Envelope, now: int) -> list[Envelope]:
        self.received.append((now, env.msg_type, env.correlation_id))
        entry = self.script.replies.get(env.msg_type)
        if entry is None:
            return []
        response, think = entry
        if response is OperatorResponse.NO_RESPONSE:
            return []
        return [Envelope(self._ids(), env.correlation_id, self.address, env.sender,
                         m.RESPONSE_LABELS[response], now + think.sample(self.rng),
                         {"drone_id": env.payload.get("drone_id")})]

    def orders(self) -> list[str]:
        return [mt for _, mt, _ in self.received if mt in (m.STOP_MISSION, m.COMPLETE_MISSION)]


# -- CUAS ----------------------------------------------------------------------

@dataclass
class DetectionScript:
    """What the CUAS will observe about one drone, and how the drone reacts later."""

    drone_id: str
    detect_at: int
    position: GeoPoint
    rid: bool = True
    authentic: bool = True
    emergency: bool = False
    restores_rid: bool = False
    returns_to: GeoPoint | None = None
    stops: bool = False
    lost_at: int | None = None
    rechecks: int = 0

    def to_json(self) -> dict:
        d = {"drone_id": self.drone_id, "detect_at": self.detect_at,
             "position": [self.position.lat, self.position.lon, self.position.alt]}
        for k in ("rid", "authentic"):
            if not getattr(self, k):
                d[k] = False
        for k in ("emergency", "restores_rid", "stops"):
            if getattr(self, k):
                d[k] = True
        if self.returns_to is not None:
            d["returns_to"] = [self.returns_to.lat, self.returns_to.lon, self.returns_to.alt]
        if self.lost_at is not None:
            d["lost_at"] = self.lost_at
        if self.rechecks:
            d["rechecks"] = self.rechecks
        return d

    @classmethod
    def from_json(cls, d: dict) -> DetectionScript:
        ret = d.get("returns_to")
        return cls(d["drone_id"], int(d["detect_at"]), GeoPoint(*d["position"]),
                   rid=d.get("rid", True), authentic=d.get("authentic", True),
                   emergency=d.get("emergency", False), restores_rid=d.get("restores_rid", False),
                   returns_to=GeoPoint(*ret) if ret is not None else None,
                   stops=d.get("stops", False), lost_at=d.get("lost_at"),
                   rechecks=int(d.get("rechecks", 0)))


@dataclass
class CuasConfig:
    zone: Zone
    access: AccessLevel = AccessLevel.OFFICIALS
    zone_criticality: str = "normal"
    confirm: ConfirmationMode = ConfirmationMode.EXPLICIT
    recheck_ms: int = 1000
    overrun_grace_ms: int = 3_600_000


@dataclass(frozen=True)
class ClarificationSample:
    drone_id: str
    protocol: int
    case_label: str
    delta_ms: int

    def __post_init__(self):
        if self.delta_ms < 0:
            raise ValueError("delta_ms must be >= 0")


@dataclass
class Track:
    script: DetectionScript
    fsm: DroneFsm
    detected_at: int
    position: GeoPoint
    rid: bool
    session_id: str | None = None
    open_env: Envelope | None = None
    rechecks_used: int = 0
    awaiting: bool = False
    last: str | None = None
    done: bool = False
    outcome: str | None = None


class CuasAgent:
    """Drives one FSM per scripted drone and talks to the authority."""

    def __init__(self, index: int, registry: Registry, config: CuasConfig,
                 scripts: list[DetectionScript], delays: DelayModel | None = None,
                 authority: str = str(m.AUTHORITY)):
        self.address = str(m.cuas_agent(index))
        self.registry = registry
        self.config = config
        self.scripts = list(scripts)
        self.delays = delays or DelayModel()
        self.authority = authority
        self.tracks: dict[str, Track] = {}
        self.by_session: dict[str, Track] = {}
        self.samples: list[ClarificationSample] = []
        self.errors: list[dict] = []
        self._ids = m.IdSource(self.address)
        self._sessions = 0

    # -- startup -------------------------------------------------------------

    def start(self) -> list[Envelope]:
        out = []
        for s in self.scripts:
            out.append(self._timer(DETECT, s.drone_id, s.detect_at))
            if s.lost_at is not None:
                out.append(self._timer(LOST, s.drone_id, s.lost_at))
        return out

    def finished(self) -> bool:
        return len(self.tracks) == len(self.scripts) and all(t.done for t in self.tracks.values())

    # -- dispatch ------------------------------------------------------------

    def handle(self, env: Envelope, now: int) -> list[Envelope]:
        if env.msg_type == m.TIMER:
            kind, drone = env.payload["kind"], env.payload["drone_id"]
            if kind == DETECT:
                return self._on_detect(drone, now)
            track = self.tracks.get(drone)
            if track is None or track.done:
                return []
            if kind == VERIFY:
                return self._on_verify(track, env.payload["protocol"], now)
            if kind == RECHECK:
                return self._on_recheck(track, now)
            if kind == LOST:
                return self._on_lost(track, now)
            raise m.MalformedEnvelope(f"unknown timer {kind!r}")
        if env.msg_type == m.ERROR:
            self.errors.append({"at": now, **env.payload})
            return []
        track = self.by_session.get(env.correlation_id)
        if track is None:
            return []
        if env.msg_type in m.CONFIRM_REQUESTS:
            return self._on_confirm_request(track, env, now)
        if "decision" in env.payload:
            return self._on_decision(track, env, now)
        return []  # e.g. verification notices

    # -- helpers -------------------------------------------------------------

    def _timer(self, kind: str, drone: str, at: int, **extra) -> Envelope:
        return Envelope(self._ids(), f"{self.address}/{drone}", self.address, self.address,
                        m.TIMER, at, {"kind": kind, "drone_id": drone, **extra})

    def _send(self, track: Track, msg_type: str, at: int, payload: dict,
              correlation: str | None = None) -> Envelope:
        return Envelope(self._ids(), correlation or track.session_id, self.address,
                        self.authority, msg_type, at, payload)

    def _new_session(self, track: Track) -> str:
        self._sessions += 1
        sid = f"{self.address}/s{self._sessions}"
        track.session_id = sid
        self.by_session[sid] = track
        return sid

    def _rid_message(self, track: Track, t: int) -> RemoteIdMessage:
        drone = DroneId(track.script.drone_id)
        token = self.registry.issue_token(drone) if track.script.authentic else b"\x00" * 16
        return RemoteIdMessage(drone, track.position, 0.0, track.position, t,
                               track.script.emergency, token)

    # -- FSM walk ------------------------------------------------------------

    def _on_detect(self, drone: str, now: int) -> list[Envelope]:
        script = next(s for s in self.scripts if s.drone_id == drone)
        track = Track(script, DroneFsm(DroneId(drone)), now, script.position, script.rid)
        self.tracks[drone] = track
        track.fsm.feed(ev(E.OBJECT_CLASSIFIED_AS_DRONE))
        return self._walk(track, now)

    def _walk(self, track: Track, t: int) -> list[Envelope]:
        """Advance through the check states until a protocol, red or resting state."""
        d = self.delays
        fsm, reg = track.fsm, self.registry
        drone = DroneId(track.script.drone_id)
        ctx: dict = {}
        while True:
            s = fsm.state
            if s is State.DRONE_DETECTED:
                if track.rid:
                    t += d.cuas_check_ms
                    ctx["rid"] = self._rid_message(track, t)
                    fsm.feed(CheckEvent(E.RID_RECEIVED, rid=ctx["rid"]))
                else:
                    t += d.rid_wait_ms
                    fsm.feed(ev(E.RID_TIMEOUT))
            elif s is State.NO_ID_RECEIVED:
                t += d.cuas_query_ms
                # only missions whose area holds the observed position are plausible
                found = [a for a in reg.find_potential_operators(self.config.zone, t)
                         if point_in_zone(track.position, a.area)]
                if found:
                    best = found[0]
                    ctx["auth"] = best
                    fsm.feed(CheckEvent(E.POTENTIAL_OPERATOR_FOUND, potential=best))
                else:
                    fsm.feed(ev(E.NO_POTENTIAL_OPERATOR))
            elif s is State.ID_RECEIVED:
                t += d.cuas_check_ms
                rid = ctx.get("rid") or self._rid_message(track, t)
                ok = reg.verify_authenticity(rid)
                fsm.feed(ev(E.AUTHENTICITY_OK if ok else E.AUTHENTICITY_FAIL))
            elif s is State.AUTHENTIC_ID:
                t += d.cuas_query_ms
                view = reg.lookup_id(drone, self.config.access)
                ctx["view"] = view
                fsm.feed(ev(E.ID_DB_HIT if view is not None else E.ID_DB_MISS))
            elif s is State.KNOWN_ID:
                valid = reg.check_validity(drone, t) is Validity.VALID
                fsm.feed(ev(E.ID_VALID if valid else E.ID_EXPIRED))
            elif s in (State.VALID_ID, State.TOLERATE_ID_FAILURE):
                t += d.cuas_query_ms
                auth = (reg.find_authorization(drone, t, track.position)
                        or reg.find_authorization_any(drone, t)
                        or reg.find_overrun(drone, t, track.position, self.config.overrun_grace_ms))
                ctx["auth"] = auth
                fsm.feed(ev(E.AUTH_DB_HIT if auth else E.AUTH_DB_MISS))
            elif s in (State.ID_NOT_IN_ID_DB, State.EXPIRED_ID):
                t += d.cuas_query_ms
                auth = reg.find_authorization(drone, t, track.position)
                ctx["auth"] = auth
                fsm.feed(ev(E.AUTH_DB_HIT if auth else E.AUTH_DB_MISS))
            elif s in (State.AUTHORIZED_MISSION, State.TOLERATE_AUTH_FAILURE):
                t += d.cuas_check_ms
                auth = ctx.get("auth")
                if auth is None and s is State.AUTHORIZED_MISSION:
                    auth = ctx["auth"] = reg.find_authorization_any(drone, t)
                inside = auth is None or point_in_zone(track.position, auth.area)
                fsm.feed(ev(E.AREA_OK if inside else E.AREA_VIOLATED))
            elif s is State.IN_AUTHORIZED_AREA:
                auth = ctx.get("auth")
                in_time = auth is None or auth.window.contains(t)
                fsm.feed(ev(E.TIME_OK if in_time else E.TIME_VIOLATED))
            else:
                break
        return self._settle(track, t, ctx)

    def _settle(self, track: Track, t: int, ctx: dict) -> list[Envelope]:
        s = track.fsm.state
        protocol = protocol_trigger(s)
        if protocol is not None:
            return [self._open(track, protocol, t, ctx)]
        if s is State.IMMEDIATE_INTERDICTION:
            # fake ID or no operator in reach: the CUAS acts alone and reports
            sid = self._new_session(track)
            self._finish(track, "local:" + track.fsm.history[-2][2].value)
            return [self._send(track, m.INTERDICTION_REPORT, t,
                               {"drone_id": track.script.drone_id, "reason": track.outcome},
                               correlation=sid)]
        if s in RESTING:
            return self._after_outcome(track, t)
        return []

    def _open(self, track: Track, protocol: int, t: int, ctx: dict) -> Envelope:
        self._new_session(track)
        p = track.position
        payload = {"drone_id": track.script.drone_id, "time": t, "position": [p.lat, p.lon, p.alt],
                   "zone_criticality": self.config.zone_criticality,
                   "emergency": track.script.emergency, "confirm": self.config.confirm.value}
        auth = ctx.get("auth")
        if auth is not None:
            payload["auth_id"] = auth.auth_id
            if protocol == 1:
                payload["operator_id"] = auth.operator_id.hex()
        view = ctx.get("view")
        if "operator_id" not in payload and view is not None and view.operator_id is not None:
            payload["operator_id"] = view.operator_id.hex()
        env = self._send(track, m.OPEN_LABELS[protocol], t, payload)
        track.open_env = env
        track.awaiting = True
        return env

    # -- authority traffic -----------------------------------------------------

    def _verified(self, track: Track, protocol: int, now: int) -> bool:
        s = track.script
        drone = DroneId(s.drone_id)
        if protocol == 1:
            return s.restores_rid
        if protocol == 7:
            if s.returns_to is None:
                return False
            auth = self.registry.find_authorization_any(drone, now)
            return auth is not None and point_in_zone(s.returns_to, auth.area)
        if protocol == 8:
            return s.stops
        if protocol == 3:
            return self.registry.lookup_id(drone, self.config.access) is not None
        valid = self.registry.check_validity(drone, now) is Validity.VALID
        if protocol == 4:
            return valid and self.registry.find_authorization(drone, now, track.position) is not None
        return valid

    def _on_confirm_request(self, track: Track, env: Envelope, now: int) -> list[Envelope]:
        protocol = int(env.payload["protocol"])
        if self.config.confirm is ConfirmationMode.IMPLICIT:
            return [self._timer(VERIFY, track.script.drone_id,
                                now + self.delays.cuas_query_ms, protocol=protocol)]
        t = now + self.delays.cuas_query_ms
        ok = self._verified(track, protocol, t)
        return [self._send(track, m.confirm_reply(protocol, ok), t, {"drone_id": track.script.drone_id},
                           correlation=env.correlation_id)]

    def _on_verify(self, track: Track, protocol: int, now: int) -> list[Envelope]:
        if self._verified(track, protocol, now) or track.open_env is None:
            return []
        # the drone is still misbehaving: report it again on the same session
        o = track.open_env
        return [self._send(track, o.msg_type, now, o.payload, correlation=o.correlation_id)]

    def _on_decision(self, track: Track, env: Envelope, now: int) -> list[Envelope]:
        p = env.payload
        decision = p["decision"]
        kind = DecisionKind(decision["kind"])
        if env.correlation_id != track.session_id or not track.awaiting:
            return []
        track.awaiting = False
        track.last = kind.value
        if not any(x.drone_id == track.script.drone_id for x in self.samples):
            self.samples.append(ClarificationSample(track.script.drone_id, int(p["protocol"]),
                                                    p["case"], now - track.detected_at))
        track.fsm.feed(CheckEvent.outcome(kind))
        if kind is D.IMMEDIATE_INTERDICTION:
            self._finish(track, kind.value)
            return [self._send(track, m.INTERDICTION_REPORT, now,
                               {"drone_id": track.script.drone_id, "reason": p["case"]})]
        if kind in (D.TIMED_INTERDICTION, D.CANCELLED):
            self._finish(track, kind.value)
            return []
        s = track.script
        if kind is D.RESTORATION_CONFIRMED:
            if s.restores_rid:
                track.rid = True
            if s.returns_to is not None:
                track.position = s.returns_to
        return self._after_outcome(track, now)

    def _after_outcome(self, track: Track, now: int) -> list[Envelope]:
        if track.rechecks_used < track.script.rechecks and track.fsm.state is not State.SURVEILLANCE:
            track.rechecks_used += 1
            return [self._timer(RECHECK, track.script.drone_id, now + self.config.recheck_ms)]
        if track.fsm.state is not State.SURVEILLANCE:
            track.fsm.feed(ev(E.MISSION_ENDED_OR_OUT_OF_RANGE))
        self._finish(track, track.last or State.COMPLIANT.value)
        return []

    def _on_recheck(self, track: Track, now: int) -> list[Envelope]:
        if track.fsm.state in RESTING:
            track.fsm.feed(ev(E.OBJECT_CLASSIFIED_AS_DRONE))
        return self._walk(track, now)

    def _on_lost(self, track: Track, now: int) -> list[Envelope]:
        if track.awaiting:
            # the authority answers with a cancellation that closes the track
            return [self._send(track, DRONE_LOST, now, {"drone_id": track.script.drone_id})]
        if track.fsm.state is not State.SURVEILLANCE:
            track.fsm.feed(ev(E.MISSION_ENDED_OR_OUT_OF_RANGE))
        self._finish(track, "lost")
        return []

    def _finish(self, track: Track, outcome: str) -> None:
        track.done = True
        if track.outcome is None:
            track.outcome = outcome
