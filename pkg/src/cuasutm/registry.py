"""FIMS data layer: the identity database (ID-DB) and the authorization database (AUTH-DB).

Rows hold the ground truth. Query methods apply the active :class:`FaultInjection`
so that database misses and stale entries can be provoked per drone; passing
``raw=True`` bypasses the faults, which is how the authority diagnoses them.
"""

from __future__ import annotations

import bisect
import enum
import hashlib
import hmac
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable

from .domain import (
    DroneId,
    GeoPoint,
    OperatorId,
    RemoteIdMessage,
    TimeWindow,
    Zone,
    point_in_zone,
    windows_overlap,
    zones_intersect,
)

DEFAULT_SECRET_REF = "authority-1"
DEFAULT_SECRET = b"fims-authority-demo-secret"


class RegistryError(Exception):
    pass


class DuplicateId(RegistryError):
    pass


class AuthorizationOverlap(RegistryError):
    pass


class UnknownSecret(RegistryError):
    pass


class AccessLevel(enum.IntEnum):
    PUBLIC = 1
    OFFICIALS = 2
    AUTHORITY = 3


class Validity(str, enum.Enum):
    VALID = "Valid"
    EXPIRED = "Expired"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class IdRecord:
    drone_id: DroneId
    operator_id: OperatorId
    expiry: int
    issuer_secret_ref: str = DEFAULT_SECRET_REF
    personally_identifiable: dict = field(default_factory=dict, compare=False)
    tracking: tuple[tuple[int, GeoPoint], ...] = ()

    def to_json(self) -> dict:
        return {
            "drone_id": self.drone_id.value,
            "operator_id": self.operator_id.hex(),
            "expiry": self.expiry,
            "issuer_secret_ref": self.issuer_secret_ref,
            "personally_identifiable": self.personally_identifiable,
            "tracking": [[t, [p.lat, p.lon, p.alt]] for t, p in self.tracking],
        }

    @classmethod
    def from_json(cls, d: dict) -> IdRecord:
        return cls(
            drone_id=DroneId(d["drone_id"]),
            operator_id=OperatorId.from_hex(d["operator_id"]),
            expiry=int(d["expiry"]),
            issuer_secret_ref=d.get("issuer_secret_ref", DEFAULT_SECRET_REF),
            personally_identifiable=dict(d.get("personally_identifiable", {})),
            tracking=tuple((int(t), GeoPoint(*p)) for t, p in d.get("tracking", [])),
        )


@dataclass(frozen=True)
class IdView:
    """An ID-DB record truncated to what one access level may see."""

    drone_id: DroneId
    level: AccessLevel
    operator_id: OperatorId | None = None
    expiry: int | None = None
    personally_identifiable: dict | None = None
    tracking: tuple[tuple[int, GeoPoint], ...] | None = None

    @classmethod
    def of(cls, rec: IdRecord, level: AccessLevel) -> IdView:
        if level is AccessLevel.PUBLIC:
            return cls(rec.drone_id, level)
        if level is AccessLevel.OFFICIALS:
            return cls(rec.drone_id, level, rec.operator_id, rec.expiry,
                       dict(rec.personally_identifiable))
        return cls(rec.drone_id, level, rec.operator_id, rec.expiry,
                   dict(rec.personally_identifiable), rec.tracking)

    def visible_fields(self) -> set[str]:
        names = ("drone_id", "operator_id", "expiry", "personally_identifiable", "tracking")
        return {n for n in names if getattr(self, n) is not None}


@dataclass(frozen=True)
class MissionAuthorization:
    auth_id: str
    drone_id: DroneId
    operator_id: OperatorId
    window: TimeWindow
    area: Zone

    def to_json(self) -> dict:
        return {
            "auth_id": self.auth_id,
            "drone_id": self.drone_id.value,
            "operator_id": self.operator_id.hex(),
            "window": {"start": self.window.start, "end": self.window.end},
            "area": self.area.to_pairs(),
        }

    @classmethod
    def from_json(cls, d: dict) -> MissionAuthorization:
        return cls(
            auth_id=str(d["auth_id"]),
            drone_id=DroneId(d["drone_id"]),
            operator_id=OperatorId.from_hex(d["operator_id"]),
            window=TimeWindow(int(d["window"]["start"]), int(d["window"]["end"])),
            area=Zone.from_pairs(d["area"]),
        )


@dataclass
class FaultInjection:
    id_db_miss: set[DroneId] = field(default_factory=set)
    auth_db_miss: set[DroneId] = field(default_factory=set)
    stale_expiry: set[DroneId] = field(default_factory=set)

    KINDS = ("id_db_miss", "auth_db_miss", "stale_expiry")

    def is_empty(self) -> bool:
        return not (self.id_db_miss or self.auth_db_miss or self.stale_expiry)

    def to_json(self) -> dict:
        return {k: sorted(d.value for d in getattr(self, k)) for k in self.KINDS}

    @classmethod
    def from_json(cls, d: dict | None) -> FaultInjection:
        d = d or {}
        return cls(**{k: {DroneId(x) for x in d.get(k, [])} for k in cls.KINDS})


TokenFn = Callable[[DroneId, bytes], bytes]


def hmac_token(drone_id: DroneId, secret: bytes) -> bytes:
    """Keyed deterministic authenticity token (truncated HMAC-SHA256)."""
    return hmac.new(secret, drone_id.value.encode(), hashlib.sha256).digest()[:16]


class Registry:
    """In-memory ID-DB and AUTH-DB with jsonl snapshots.

    Readers never take the lock; every write replaces whole containers
    under ``_write_lock`` so concurrent queries see a consistent snapshot.
    """

    def __init__(self, secrets: dict[str, bytes] | None = None,
                 token_fn: TokenFn = hmac_token,
                 faults: FaultInjection | None = None):
        self.secrets = dict(secrets) if secrets is not None else {DEFAULT_SECRET_REF: DEFAULT_SECRET}
        self.token_fn = token_fn
        self.faults = faults if faults is not None else FaultInjection()
        self._ids: dict[DroneId, IdRecord] = {}
        self._auths_by_drone: dict[DroneId, tuple[MissionAuthorization, ...]] = {}
        # sorted by (window.start, drone_id, auth_id); the time index for zone queries
        self._auth_index: list[tuple[int, str, str, MissionAuthorization]] = []
        self._write_lock = threading.Lock()

    # -- ID-DB -----------------------------------------------------------

    def register_drone(self, rec: IdRecord) -> None:
        with self._write_lock:
            if rec.drone_id in self._ids:
                raise DuplicateId(rec.drone_id.value)
            ids = dict(self._ids)
            ids[rec.drone_id] = rec
            self._ids = ids

    def lookup_id(self, drone_id: DroneId, level: AccessLevel = AccessLevel.AUTHORITY,
                  raw: bool = False) -> IdView | None:
        rec = self._ids.get(drone_id)
        if rec is None or (not raw and drone_id in self.faults.id_db_miss):
            return None
        if not raw and drone_id in self.faults.stale_expiry:
            rec = replace(rec, expiry=min(rec.expiry, 0))
        return IdView.of(rec, level)

    def record(self, drone_id: DroneId) -> IdRecord | None:
        return self._ids.get(drone_id)

    def records(self) -> list[IdRecord]:
        return sorted(self._ids.values(), key=lambda r: r.drone_id)

    def check_validity(self, drone_id: DroneId, t: int, raw: bool = False) -> Validity:
        view = self.lookup_id(drone_id, AccessLevel.OFFICIALS, raw=raw)
        if view is None:
            return Validity.UNKNOWN
        return Validity.VALID if t < view.expiry else Validity.EXPIRED

    def operator_of(self, drone_id: DroneId) -> OperatorId | None:
        rec = self._ids.get(drone_id)
        return rec.operator_id if rec else None

    # -- authenticity ----------------------------------------------------

    def issue_token(self, drone_id: DroneId, secret_ref: str = DEFAULT_SECRET_REF) -> bytes:
        try:
            secret = self.secrets[secret_ref]
        except KeyError:
            raise UnknownSecret(secret_ref) from None
        return self.token_fn(drone_id, secret)

    def verify_authenticity(self, msg: RemoteIdMessage) -> bool:
        # deliberately independent of ID-DB presence
        return any(hmac.compare_digest(msg.auth_token, self.token_fn(msg.drone_id, s))
                   for s in self.secrets.values())

    # -- AUTH-DB ---------------------------------------------------------

    def add_authorization(self, auth: MissionAuthorization) -> None:
        with self._write_lock:
            existing = self._auths_by_drone.get(auth.drone_id, ())
            for other in existing:
                if windows_overlap(other.window, auth.window):
                    raise AuthorizationOverlap(
                        f"{auth.auth_id} overlaps {other.auth_id} for {auth.drone_id.value}")
                if other.auth_id == auth.auth_id:
                    raise AuthorizationOverlap(f"duplicate auth_id {auth.auth_id}")
            by_drone = dict(self._auths_by_drone)
            by_drone[auth.drone_id] = tuple(sorted(existing + (auth,), key=lambda a: a.window.start))
            index = list(self._auth_index)
            bisect.insort(index, (auth.window.start, auth.drone_id.value, auth.auth_id, auth))
            self._auths_by_drone, self._auth_index = by_drone, index

    def authorizations(self, drone_id: DroneId | None = None) -> list[MissionAuthorization]:
        if drone_id is not None:
            return list(self._auths_by_drone.get(drone_id, ()))
        return [row[3] for row in self._auth_index]

    def _auths(self, drone_id: DroneId, raw: bool) -> tuple[MissionAuthorization, ...]:
        if not raw and drone_id in self.faults.auth_db_miss:
            return ()
        return self._auths_by_drone.get(drone_id, ())

    def find_authorization(self, drone_id: DroneId, t: int, p: GeoPoint,
                           raw: bool = False) -> MissionAuthorization | None:
        for a in self._auths(drone_id, raw):
            if a.window.contains(t) and point_in_zone(p, a.area):
                return a
        return None

    def find_authorization_any(self, drone_id: DroneId, t: int,
                               raw: bool = False) -> MissionAuthorization | None:
        for a in self._auths(drone_id, raw):
            if a.window.contains(t):
                return a
        return None

    def find_overrun(self, drone_id: DroneId, t: int, p: GeoPoint, grace_ms: int,
                     raw: bool = False) -> MissionAuthorization | None:
        """The latest mission for this drone over ``p`` that ended within ``grace_ms`` before ``t``."""
        best = None
        for a in self._auths(drone_id, raw):
            if a.window.end <= t < a.window.end + grace_ms and point_in_zone(p, a.area):
                if best is None or a.window.end > best.window.end:
                    best = a
        return best

    def find_potential_operators(self, zone: Zone, t: int,
                                 raw: bool = False) -> list[MissionAuthorization]:
        hi = bisect.bisect_right(self._auth_index, (t, "\U0010ffff"))
        out = []
        for start, _, _, a in self._auth_index[:hi]:
            if t < a.window.end and (raw or a.drone_id not in self.faults.auth_db_miss) \
                    and zones_intersect(a.area, zone):
                out.append(a)
        return out

    # -- faults ----------------------------------------------------------

    def set_fault(self, kind: str, drone_id: DroneId, active: bool = True) -> None:
        if kind not in FaultInjection.KINDS:
            raise ValueError(f"unknown fault kind {kind!r}")
        with self._write_lock:
            current = set(getattr(self.faults, kind))
            if active:
                current.add(drone_id)
            else:
                current.discard(drone_id)
            setattr(self.faults, kind, current)

    def clear_faults(self) -> None:
        with self._write_lock:
            self.faults = FaultInjection()

    # -- snapshots -------------------------------------------------------

    def dump(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        with open(d / "id_db.jsonl", "w") as fh:
            for rec in self.records():
                fh.write(json.dumps(rec.to_json(), sort_keys=True) + "\n")
        with open(d / "auth_db.jsonl", "w") as fh:
            for a in self.authorizations():
                fh.write(json.dumps(a.to_json(), sort_keys=True) + "\n")

    def load_rows(self, id_rows: Iterable[dict], auth_rows: Iterable[dict]) -> None:
        for row in id_rows:
            self.register_drone(IdRecord.from_json(row))
        for row in auth_rows:
            self.add_authorization(MissionAuthorization.from_json(row))

    @classmethod
    def load(cls, directory: str | Path, **kwargs) -> Registry:
        d = Path(directory)
        reg = cls(**kwargs)
        reg.load_rows(_read_jsonl(d / "id_db.jsonl"), _read_jsonl(d / "auth_db.jsonl"))
        return reg


def _read_jsonl(path: Path) -> list[dict]:
    if not path.exists():
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
