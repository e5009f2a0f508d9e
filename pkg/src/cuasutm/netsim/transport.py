"""Delay model, clocks and the deterministic in-process message bus."""

from __future__ import annotations

import heapq
import json
import itertools
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

from ..clarify import ProtocolError
from ..messages import ERROR, Envelope, IdSource, MalformedEnvelope, Role


class UnknownAgent(KeyError):
    pass


@dataclass(frozen=True)
class Dist:
    """Constant (``lo == hi``) or uniform integer delay in milliseconds."""

    lo: int = 0
    hi: int | None = None

    def __post_init__(self):
        hi = self.lo if self.hi is None else self.hi
        object.__setattr__(self, "hi", hi)
        if self.lo < 0 or hi < self.lo:
            raise ValueError(f"invalid delay range [{self.lo}, {hi}]")

    def sample(self, rng: random.Random) -> int:
        if self.lo == self.hi:
            return self.lo
        return rng.randint(self.lo, self.hi)

    def to_json(self):
        return self.lo if self.lo == self.hi else [self.lo, self.hi]

    @classmethod
    def from_json(cls, v) -> Dist:
        if isinstance(v, Dist):
            return v
        if isinstance(v, (list, tuple)):
            return cls(int(v[0]), int(v[1]))
        return cls(int(v))


def _role_of(address: str) -> str:
    return address.partition(":")[0]


@dataclass
class DelayModel:
    """Per-edge latency (keyed by sender/recipient role) plus per-agent processing."""

    latency: dict[tuple[str, str], Dist] = field(default_factory=dict)
    default_latency: Dist = field(default_factory=Dist)
    authority_processing_ms: int = 0
    authority_service_ms: int = 0
    authority_db_check_ms: int = 0
    risk_ms: int = 0
    fast_risk_ms: int = 0
    cuas_check_ms: int = 0
    cuas_query_ms: int = 0
    rid_wait_ms: int = 0
    operator_think: Dist = field(default_factory=Dist)

    def edge(self, sender: str, recipient: str) -> Dist:
        if sender == recipient:
            return Dist(0)
        return self.latency.get((_role_of(sender), _role_of(recipient)), self.default_latency)

    @classmethod
    def zero(cls) -> DelayModel:
        return cls()

    @classmethod
    def paper(cls) -> DelayModel:
        """Desk-scale preset: a lone database-only case clarifies in about 2.5 s."""
        return cls(
            default_latency=Dist(100),
            authority_processing_ms=200,
            authority_service_ms=20,
            authority_db_check_ms=900,
            risk_ms=300,
            fast_risk_ms=150,
            cuas_check_ms=200,
            cuas_query_ms=400,
            rid_wait_ms=1000,
            operator_think=Dist(2000),
        )

    def to_json(self) -> dict:
        return {
            "latency": [{"from": a, "to": b, "ms": d.to_json()} for (a, b), d in self.latency.items()],
            "default_latency": self.default_latency.to_json(),
            "authority_processing_ms": self.authority_processing_ms,
            "authority_service_ms": self.authority_service_ms,
            "authority_db_check_ms": self.authority_db_check_ms,
            "risk_ms": self.risk_ms,
            "fast_risk_ms": self.fast_risk_ms,
            "cuas_check_ms": self.cuas_check_ms,
            "cuas_query_ms": self.cuas_query_ms,
            "rid_wait_ms": self.rid_wait_ms,
            "operator_think": self.operator_think.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict | str | None) -> DelayModel:
        if d is None or d == "zero":
            return cls.zero()
        if d == "paper":
            return cls.paper()
        d = dict(d)
        base = cls.paper() if d.pop("preset", None) == "paper" else cls.zero()
        for k in ("authority_processing_ms", "authority_service_ms", "authority_db_check_ms",
                  "risk_ms", "fast_risk_ms", "cuas_check_ms", "cuas_query_ms", "rid_wait_ms"):
            if k in d:
                setattr(base, k, int(d[k]))
        if "default_latency" in d:
            base.default_latency = Dist.from_json(d["default_latency"])
        if "operator_think" in d:
            base.operator_think = Dist.from_json(d["operator_think"])
        for row in d.get("latency", []):
            base.latency[(row["from"], row["to"])] = Dist.from_json(row["ms"])
        for name, v in vars(base).items():
            if isinstance(v, int) and v < 0:
                raise ValueError(f"{name} must be >= 0")
        return base


class VirtualClock:
    """Time advances only through :meth:`advance_to` / :meth:`advance`."""

    mode = "virtual"

    def __init__(self, start: int = 0):
        self._now = start

    def now(self) -> int:
        return self._now

    def advance_to(self, t: int) -> None:
        if t < self._now:
            raise ValueError(f"virtual clock cannot go back from {self._now} to {t}")
        self._now = t

    def advance(self, dt: int) -> None:
        self.advance_to(self._now + dt)


class WallClock:
    """Monotone wall time in milliseconds, optionally compressed by ``time_scale``."""

    mode = "wall"

    def __init__(self, time_scale: float = 1.0, start: int = 0):
        if time_scale <= 0:
            raise ValueError("time_scale must be positive")
        self.time_scale = time_scale
        self.start = start
        self._t0 = time.monotonic()

    def now(self) -> int:
        return self.start + int((time.monotonic() - self._t0) * 1000 / self.time_scale)

    def seconds_until(self, t: int) -> float:
        return max(0.0, (t - self.now()) * self.time_scale / 1000)

    def anchor(self, t: int) -> None:
        """Make ``now()`` read ``t`` at this instant."""
        self.start = t
        self._t0 = time.monotonic()


class Agent(Protocol):
    address: str

    def handle(self, env: Envelope, now: int) -> list[Envelope]: ...


class Channel:
    """One side of a duplex channel between two registered endpoints."""

    def __init__(self, bus: InProcBus, local: str, remote: str):
        self.bus, self.local, self.remote = bus, local, remote
        self._ids = IdSource(local)

    def send(self, msg_type: str, payload: dict | None = None, correlation_id: str = "-",
             at: int | None = None) -> Envelope:
        at = self.bus.clock.now() if at is None else at
        env = Envelope(self._ids(), correlation_id, self.local, self.remote, msg_type, at,
                       payload or {})
        self.bus.post(self._checked(env))
        return env

    def send_envelope(self, env: Envelope) -> None:
        if env.sender != self.local or env.recipient != self.remote:
            raise ValueError("envelope does not belong to this channel")
        self.bus.post(self._checked(env))

    def _checked(self, env: Envelope) -> Envelope:
        if env.recipient not in self.bus.agents:
            raise UnknownAgent(env.recipient)
        return env

    def recv(self) -> tuple[int, Envelope] | None:
        box = self.bus.mailboxes[self.local]
        for i, (t, env) in enumerate(box):
            if env.sender == self.remote:
                return box.pop(i)
        return None


_EMIT, _DELIVER, _CALL = 1, 2, 0


class InProcBus:
    """Discrete-event transport with a virtual clock.

    Envelopes leave their sender at ``sent_at`` and arrive after the sampled
    edge latency; arrival times on each ordered pair are forced monotone so
    delivery is FIFO per pair. Scripted callbacks run before messages that
    fall on the same instant.
    """

    def __init__(self, delays: DelayModel | None = None, seed: int = 0,
                 clock: VirtualClock | None = None,
                 drop: Callable[[Envelope], bool] | None = None):
        self.delays = delays or DelayModel()
        self.rng = random.Random(seed)
        self.clock = clock or VirtualClock()
        self.drop = drop
        self.agents: dict[str, Agent | None] = {}
        self.mailboxes: dict[str, list[tuple[int, Envelope]]] = {}
        self.transcript: list[tuple[int, Envelope]] = []
        self.errors: list[tuple[int, Envelope, Exception]] = []
        self._queue: list = []
        self._seq = itertools.count()
        self._last_arrival: dict[tuple[str, str], int] = {}
        self.undeliverable: list[tuple[int, Envelope]] = []
        self._error_ids = IdSource("bus")

    def register(self, address: str, agent: Agent | None = None) -> None:
        self.agents[address] = agent
        self.mailboxes.setdefault(address, [])

    def open_channel(self, a: str, b: str) -> tuple[Channel, Channel]:
        for x in (a, b):
            if x not in self.agents:
                raise UnknownAgent(x)
        return Channel(self, a, b), Channel(self, b, a)

    def post(self, env: Envelope) -> None:
        at = max(env.sent_at, self.clock.now())
        heapq.heappush(self._queue, (at, _EMIT, next(self._seq), env))

    def call_at(self, t: int, fn: Callable[[int], None]) -> None:
        heapq.heappush(self._queue, (t, _CALL, next(self._seq), fn))

    def pending(self) -> int:
        return len(self._queue)

    def step(self) -> bool:
        if not self._queue:
            return False
        t, kind, _, item = heapq.heappop(self._queue)
        self.clock.advance_to(t)
        if kind == _CALL:
            item(t)
        elif kind == _EMIT:
            self._emit(item, t)
        else:
            self._deliver(item, t)
        return True

    def run(self, until: int | None = None, max_events: int = 10_000_000) -> int:
        n = 0
        while self._queue and n < max_events:
            if until is not None and self._queue[0][0] > until:
                self.clock.advance_to(max(self.clock.now(), until))
                break
            self.step()
            n += 1
        return n

    def _emit(self, env: Envelope, t: int) -> None:
        if self.drop is not None and self.drop(env):
            return
        lat = self.delays.edge(env.sender, env.recipient).sample(self.rng)
        pair = (env.sender, env.recipient)
        arrive = max(t + lat, self._last_arrival.get(pair, 0))
        self._last_arrival[pair] = arrive
        heapq.heappush(self._queue, (arrive, _DELIVER, next(self._seq), env))

    def _deliver(self, env: Envelope, t: int) -> None:
        agent = self._accept(env, t)
        if agent is not None:
            self._dispatch(env, t, agent.handle)

    def _accept(self, env: Envelope, t: int):
        if env.recipient not in self.agents:
            # nobody connected under that address: the message is lost
            self.undeliverable.append((t, env))
            return None
        self.transcript.append((t, env))
        agent = self.agents[env.recipient]
        if agent is None:
            self.mailboxes[env.recipient].append((t, env))
        return agent

    def _dispatch(self, env: Envelope, t: int, handle) -> None:
        try:
            out = handle(env, t)
        except (ProtocolError, MalformedEnvelope) as exc:
            self._reject(env, t, exc)
            return
        for e in out:
            self.post(e)

    def _reject(self, env: Envelope, t: int, exc: Exception) -> None:
        self.errors.append((t, env, exc))
        if env.sender in self.agents and env.sender != env.recipient:
            self.post(Envelope(self._error_ids(), env.correlation_id, env.recipient,
                               env.sender, ERROR, t,
                               {"error": type(exc).__name__, "detail": str(exc),
                                "msg_id": env.msg_id}))

    def transcript_lines(self) -> list[str]:
        return [transcript_line(t, e) for t, e in self.transcript]


def transcript_line(delivered_at: int, env: Envelope) -> str:
    d = env.to_json()
    d["delivered_at"] = delivered_at
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def is_role(address: str, role: Role) -> bool:
    return _role_of(address) == role.value
