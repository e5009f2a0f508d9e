"""Wire vocabulary: agent addresses, envelopes and the message labels they carry."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any

ENVELOPE_FIELDS = ("msg_id", "correlation_id", "sender", "recipient", "msg_type", "sent_at", "payload")


class MalformedEnvelope(ValueError):
    pass


class Role(str, enum.Enum):
    AUTHORITY = "authority"
    CUAS = "cuas"
    OPERATOR = "operator"
    COURT = "court"


@dataclass(frozen=True, order=True)
class AgentId:
    """``role:index``; operators are indexed by their 16-hex operator id."""

    role: Role
    index: int | str = 0

    def __str__(self) -> str:
        if self.role in (Role.AUTHORITY, Role.COURT):
            return self.role.value
        return f"{self.role.value}:{self.index}"

    @classmethod
    def parse(cls, text: str) -> AgentId:
        role, _, index = text.partition(":")
        try:
            r = Role(role)
        except ValueError:
            raise MalformedEnvelope(f"unknown agent role in {text!r}") from None
        if r in (Role.AUTHORITY, Role.COURT):
            return cls(r)
        if not index:
            raise MalformedEnvelope(f"agent {text!r} needs an index")
        return cls(r, int(index) if index.isdigit() and r is Role.CUAS else index)


AUTHORITY = AgentId(Role.AUTHORITY)
COURT = AgentId(Role.COURT)


def cuas_agent(i: int) -> AgentId:
    return AgentId(Role.CUAS, i)


def operator_agent(operator_hex: str) -> AgentId:
    return AgentId(Role.OPERATOR, operator_hex)


@dataclass(frozen=True)
class Envelope:
    msg_id: str
    correlation_id: str
    sender: str
    recipient: str
    msg_type: str
    sent_at: int
    payload: dict[str, Any] = field(default_factory=dict, compare=True, hash=False)

    def to_json(self) -> dict:
        return {
            "msg_id": self.msg_id,
            "correlation_id": self.correlation_id,
            "sender": self.sender,
            "recipient": self.recipient,
            "msg_type": self.msg_type,
            "sent_at": self.sent_at,
            "payload": self.payload,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, data: Any) -> Envelope:
        if not isinstance(data, dict):
            raise MalformedEnvelope("envelope must be a JSON object")
        missing = [k for k in ENVELOPE_FIELDS if k not in data]
        if missing:
            raise MalformedEnvelope(f"envelope missing fields {missing}")
        extra = set(data) - set(ENVELOPE_FIELDS) - {"delivered_at"}
        if extra:
            raise MalformedEnvelope(f"envelope has unknown fields {sorted(extra)}")
        for k in ("msg_id", "correlation_id", "sender", "recipient", "msg_type"):
            if not isinstance(data[k], str) or not data[k]:
                raise MalformedEnvelope(f"field {k} must be a non-empty string")
        if not isinstance(data["sent_at"], int) or isinstance(data["sent_at"], bool):
            raise MalformedEnvelope("sent_at must be integer milliseconds")
        if not isinstance(data["payload"], dict):
            raise MalformedEnvelope("payload must be an object")
        return cls(data["msg_id"], data["correlation_id"], data["sender"], data["recipient"],
                   data["msg_type"], data["sent_at"], data["payload"])

    @classmethod
    def loads(cls, line: str | bytes) -> Envelope:
        try:
            data = json.loads(line)
        except ValueError as exc:
            raise MalformedEnvelope(f"not JSON: {exc}") from None
        return cls.from_json(data)


class IdSource:
    """Per-sender message-id counter."""

    def __init__(self, owner: str):
        self.owner = owner
        self._n = 0

    def __call__(self) -> str:
        self._n += 1
        return f"{self.owner}#{self._n}"


# -- labels ---------------------------------------------------------------

OPEN_LABELS = {
    1: "NO ID BUT POTENTIAL OPERATOR",
    2: "UNKNOWN ID",
    3: "ID-DB MISS",
    4: "EXPIRED ID & UNAUTHORIZED MISSION",
    5: "EXPIRED ID BUT AUTHORIZED MISSION",
    6: "AUTH-DB MISS",
    7: "AREA VIOLATION",
    8: "TIME VIOLATION",
}
PROTOCOL_OF_OPEN = {v: k for k, v in OPEN_LABELS.items()}

OPERATOR_QUERY = {
    1: "CHECK/RESTORE ID TRANSMISSION",
    7: "RETURN TO AUTHORIZED AREA",
    8: "STOP MISSION IF AUTHORIZED TIME IS EXCEEDED",
}

CONFIRM_TOPIC = {
    1: "ID RESTORATION",
    3: "ID RESTORATION",
    4: "DATABASE RESTORATION",
    5: "VALID ID ENTRY",
    7: "RETURN TO AUTHORIZED AREA",
    8: "MISSION STOP",
}


def confirm_request(protocol: int) -> str:
    return f"CONFIRM {CONFIRM_TOPIC[protocol]}!"


def confirm_reply(protocol: int, ok: bool) -> str:
    return f"{CONFIRM_TOPIC[protocol]} {'CONFIRMED' if ok else 'NOT CONFIRMED'}"


def verified_label(protocol: int) -> str:
    return f"{CONFIRM_TOPIC[protocol]} VERIFIED"


CONFIRM_REQUESTS = {confirm_request(p) for p in CONFIRM_TOPIC}
CONFIRM_REPLIES = {confirm_reply(p, ok): ok for p in CONFIRM_TOPIC for ok in (True, False)}

STOP_MISSION = "STOP MISSION"
COMPLETE_MISSION = "COMPLETE MISSION"
VERIFICATION_PENDING = "RESTORATION CLAIM UNDER VERIFICATION"
INTERDICTION_REPORT = "INTERDICTION REPORT"
INTERDICTION_AUTHORIZED = "INTERDICTION AUTHORIZED"
LAWSUIT = "LAWSUIT"
TIMER = "TIMER"
ERROR = "ERROR"
HELLO = "HELLO"


class OperatorResponse(str, enum.Enum):
    NO_RESPONSE = "NoResponse"
    NOT_FLYING = "NotFlying"
    ALREADY_TRANSMITTING = "AlreadyTransmitting"
    CANNOT_RESTORE = "CannotRestore"
    RESTORED_ID = "RestoredId"
    ALREADY_IN_AUTHORIZED_AREA = "AlreadyInAuthorizedArea"
    CANNOT_RETURN = "CannotReturn"
    RETURNED_TO_AREA = "ReturnedToArea"
    NOT_EXCEEDING_TIME = "NotExceedingTime"
    CANNOT_STOP = "CannotStop"
    STOPPED_MISSION = "StoppedMission"


R = OperatorResponse

RESPONSE_LABELS = {
    R.NOT_FLYING: "I AM NOT FLYING",
    R.ALREADY_TRANSMITTING: "I AM ALREADY TRANSMITTING MY ID",
    R.CANNOT_RESTORE: "I AM NOT ABLE TO RESTORE ID",
    R.RESTORED_ID: "I RESTORED ID TRANSMISSION",
    R.ALREADY_IN_AUTHORIZED_AREA: "I AM ALREADY FLYING IN AUTHORIZED AREA",
    R.CANNOT_RETURN: "I CANNOT RETURN TO AUTHORIZED AREA",
    R.RETURNED_TO_AREA: "I RETURNED TO AUTHORIZED AREA",
    R.NOT_EXCEEDING_TIME: "I AM NOT EXCEEDING AUTHORIZED FLIGHT TIME",
    R.CANNOT_STOP: "I CANNOT STOP MISSION",
    R.STOPPED_MISSION: "I STOPPED MISSION",
}
RESPONSE_OF_LABEL = {v: k for k, v in RESPONSE_LABELS.items()}

LEGAL_RESPONSES = {
    1: frozenset({R.NO_RESPONSE, R.NOT_FLYING, R.ALREADY_TRANSMITTING, R.CANNOT_RESTORE, R.RESTORED_ID}),
    7: frozenset({R.NO_RESPONSE, R.ALREADY_IN_AUTHORIZED_AREA, R.CANNOT_RETURN, R.RETURNED_TO_AREA}),
    8: frozenset({R.NO_RESPONSE, R.NOT_EXCEEDING_TIME, R.CANNOT_STOP, R.STOPPED_MISSION}),
}
