"""Core value types shared by the registry, the FSM, the protocols and the simulator."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when a value object is constructed with invalid fields."""


@dataclass(frozen=True, order=True)
class OperatorId:
    value: bytes

    def __post_init__(self):
        if not isinstance(self.value, (bytes, bytearray)) or len(self.value) != 8:
            raise DomainError(f"operator id must be exactly 8 bytes, got {self.value!r}")
        object.__setattr__(self, "value", bytes(self.value))

    @classmethod
    def from_hex(cls, text: str) -> OperatorId:
        if len(text) != 16:
            raise DomainError(f"operator id hex must have 16 characters: {text!r}")
        try:
            return cls(bytes.fromhex(text))
        except ValueError as exc:
            raise DomainError(str(exc)) from None

    @classmethod
    def from_int(cls, n: int) -> OperatorId:
        return cls(n.to_bytes(8, "big"))

    def hex(self) -> str:
        return self.value.hex()

    def __str__(self) -> str:
        return self.hex()


@dataclass(frozen=True, order=True)
class DroneId:
    value: str

    def __post_init__(self):
        v = self.value
        if not isinstance(v, str) or not 1 <= len(v) <= 20:
            raise DomainError(f"drone id must be 1-20 characters: {v!r}")
        if not v.isprintable():
            raise DomainError(f"drone id contains control characters: {v!r}")

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class GeoPoint:
    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        for name in ("lat", "lon", "alt"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if not -90.0 <= self.lat <= 90.0:
            raise DomainError(f"latitude out of range: {self.lat}")
        if not -180.0 <= self.lon <= 180.0:
            raise DomainError(f"longitude out of range: {self.lon}")
        if self.alt < 0:
            raise DomainError(f"altitude must be >= 0: {self.alt}")


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, p) -> bool:
    return (min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
            and min(a[1], b[1]) <= p[1] <= max(a[1], b[1]))


def segments_cross(a, b, c, d) -> bool:
    """True if closed segments ab and cd share at least one point."""
    d1, d2 = _orient(c, d, a), _orient(c, d, b)
    d3, d4 = _orient(a, b, c), _orient(a, b, d)
    if ((d1 > 0) != (d2 > 0)) and d1 != 0 and d2 != 0 \
            and ((d3 > 0) != (d4 > 0)) and d3 != 0 and d4 != 0:
        return True
    if d1 == 0 and _on_segment(c, d, a):
        return True
    if d2 == 0 and _on_segment(c, d, b):
        return True
    if d3 == 0 and _on_segment(a, b, c):
        return True
    if d4 == 0 and _on_segment(a, b, d):
        return True
    return False


@dataclass(frozen=True)
class Zone:
    """A simple polygon in (lat, lon); altitude is ignored."""

    vertices: tuple[GeoPoint, ...]

    def __post_init__(self):
        verts = tuple(self.vertices)
        object.__setattr__(self, "vertices", verts)
        n = len(verts)
        if n < 3:
            raise DomainError("zone needs at least 3 vertices")
        pts = self.coords()
        for i in range(n):
            if pts[i] == pts[(i + 1) % n]:
                raise DomainError(f"consecutive vertices {i} and {(i + 1) % n} are equal")
        # non-adjacent edges must not touch
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if segments_cross(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]):
                    raise DomainError(f"zone edges {i} and {j} cross")
        if all(_orient(pts[0], pts[1], p) == 0 for p in pts[2:]):
            raise DomainError("zone is degenerate (collinear vertices)")

    @classmethod
    def from_pairs(cls, pairs) -> Zone:
        return cls(tuple(GeoPoint(float(lat), float(lon)) for lat, lon in pairs))

    @classmethod
    def rectangle(cls, lat0, lon0, lat1, lon1) -> Zone:
        return cls.from_pairs([(lat0, lon0), (lat0, lon1), (lat1, lon1), (lat1, lon0)])

    def coords(self) -> list[tuple[float, float]]:
        return [(v.lat, v.lon) for v in self.vertices]

    def to_pairs(self) -> list[list[float]]:
        return [[v.lat, v.lon] for v in self.vertices]

    def bbox(self) -> tuple[float, float, float, float]:
        lats = [v.lat for v in self.vertices]
        lons = [v.lon for v in self.vertices]
        return min(lats), min(lons), max(lats), max(lons)


def point_in_zone(p: GeoPoint, z: Zone) -> bool:
    """Ray casting on the (lat, lon) projection; boundary points count as inside."""
    x, y = p.lat, p.lon
    pts = z.coords()
    n = len(pts)
    inside = False
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        if _orient(a, b, (x, y)) == 0 and _on_segment(a, b, (x, y)):
            return True
        if (a[1] > y) != (b[1] > y):
            x_cross = a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1])
            if x < x_cross:
                inside = not inside
    return inside


def zones_intersect(a: Zone, b: Zone) -> bool:
    """True if two zones share any point (edges touching counts)."""
    pa, pb = a.coords(), b.coords()
    for i in range(len(pa)):
        for j in range(len(pb)):
            if segments_cross(pa[i], pa[(i + 1) % len(pa)], pb[j], pb[(j + 1) % len(pb)]):
                return True
    return point_in_zone(a.vertices[0], b) or point_in_zone(b.vertices[0], a)


@dataclass(frozen=True)
class TimeWindow:
    """Half-open interval [start, end) in integer milliseconds."""

    start: int
    end: int

    def __post_init__(self):
        if not self.start < self.end:
            raise DomainError(f"time window needs start < end: [{self.start}, {self.end})")

    def contains(self, t: int) -> bool:
        return self.start <= t < self.end


def windows_overlap(a: TimeWindow, b: TimeWindow) -> bool:
    return a.start < b.end and b.start < a.end


@dataclass(frozen=True)
class RemoteIdMessage:
    drone_id: DroneId
    position: GeoPoint
    velocity: float
    station: GeoPoint
    time_mark: int
    emergency: bool = False
    auth_token: bytes = b""

    def __post_init__(self):
        if not math.isfinite(self.velocity) or self.velocity < 0:
            raise DomainError(f"velocity must be finite and >= 0: {self.velocity}")

    def check_skew(self, sent_at: int, max_skew_ms: int) -> bool:
        return abs(self.time_mark - sent_at) <= max_skew_ms


class RiskLevel(str, enum.Enum):
    LOW = "Low"
    HIGH = "High"


class DecisionKind(str, enum.Enum):
    IMMEDIATE_INTERDICTION = "ImmediateInterdiction"
    TIMED_INTERDICTION = "TimedInterdiction"
    TOLERATE_ID_FAILURE = "TolerateIdFailure"
    TOLERATE_AUTH_FAILURE = "TolerateAuthFailure"
    TOLERATE_MISSION = "TolerateMission"
    RESTORATION_CONFIRMED = "RestorationConfirmed"
    ISSUE_RESOLVED = "IssueResolved"
    CANCELLED = "Cancelled"


TOLERANCE_KINDS = frozenset({
    DecisionKind.TOLERATE_ID_FAILURE,
    DecisionKind.TOLERATE_AUTH_FAILURE,
    DecisionKind.TOLERATE_MISSION,
})
INTERDICTION_KINDS = frozenset({
    DecisionKind.IMMEDIATE_INTERDICTION,
    DecisionKind.TIMED_INTERDICTION,
})


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    timeout_s: float | None = None
    nondestructive: bool = False

    def __post_init__(self):
        if self.kind is DecisionKind.TIMED_INTERDICTION:
            if self.timeout_s is None or not self.timeout_s > 0:
                raise DomainError("timed interdiction requires a positive timeout")
        elif self.timeout_s is not None:
            raise DomainError(f"{self.kind.value} takes no timeout")

    @classmethod
    def immediate(cls, nondestructive: bool = False) -> Decision:
        return cls(DecisionKind.IMMEDIATE_INTERDICTION, nondestructive=nondestructive)

    @classmethod
    def timed(cls, timeout_s: float) -> Decision:
        return cls(DecisionKind.TIMED_INTERDICTION, timeout_s=timeout_s)

    @classmethod
    def of(cls, kind: DecisionKind) -> Decision:
        return cls(kind)

    @property
    def is_tolerance(self) -> bool:
        return self.kind in TOLERANCE_KINDS

    @property
    def is_interdiction(self) -> bool:
        return self.kind in INTERDICTION_KINDS

    def to_json(self) -> dict:
        out: dict = {"kind": self.kind.value}
        if self.timeout_s is not None:
            out["timeout_s"] = self.timeout_s
        if self.nondestructive:
            out["nondestructive"] = True
        return out

    @classmethod
    def from_json(cls, data: dict) -> Decision:
        return cls(DecisionKind(data["kind"]), data.get("timeout_s"),
                   bool(data.get("nondestructive", False)))
