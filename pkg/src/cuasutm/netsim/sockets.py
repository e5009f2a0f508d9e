"""TCP transport: newline-delimited JSON envelopes between the authority and its clients.

The authority side owns the event queue. Each client (a CUAS or an operator)
opens one connection, announces itself with ``HELLO`` and then answers every
delivered envelope with the envelopes it emits, closed by a ``DONE`` marker.
Deliveries carry an extra ``delivered_at`` key so clients share the hub's clock.
Under the virtual clock the exchange is lockstep and therefore reproducible;
under the wall clock the hub sleeps until each event is due.
"""

from __future__ import annotations

import asyncio
import heapq
import json
import logging

from .. import messages as m
from ..clarify import ProtocolError
from ..messages import Envelope, MalformedEnvelope
from .sim import SimResult, World, build_agents, collect
from .transport import _CALL, _EMIT, InProcBus, VirtualClock, WallClock

log = logging.getLogger(__name__)

DONE = "DONE"


def _line(env: Envelope, delivered_at: int | None = None) -> bytes:
    d = env.to_json()
    if delivered_at is not None:
        d["delivered_at"] = delivered_at
    return json.dumps(d, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def _marker(sender: str, msg_type: str) -> Envelope:
    return Envelope(f"{sender}#{msg_type.lower()}", "-", sender, str(m.AUTHORITY), msg_type, 0, {})


async def _read_batch(reader: asyncio.StreamReader) -> list[Envelope]:
    out = []
    while True:
        raw = await reader.readline()
        if not raw:
            raise ConnectionError("peer closed mid-batch")
        env = Envelope.loads(raw)
        if env.msg_type == DONE:
            return out
        out.append(env)


class RemoteEndpoint:
    def __init__(self, address: str, reader, writer):
        self.address, self.reader, self.writer = address, reader, writer

    async def call(self, env: Envelope, t: int) -> list[Envelope]:
        self.writer.write(_line(env, t))
        await self.writer.drain()
        return await _read_batch(self.reader)

    def close(self) -> None:
        self.writer.close()


class SocketBus(InProcBus):
    """The authority-side hub: same scheduling rules as the in-process bus."""

    def __init__(self, delays, seed: int = 0, clock: VirtualClock | WallClock | None = None):
        super().__init__(delays, seed)
        self.clock = clock or VirtualClock()
        self.boot: dict[str, list[Envelope]] = {}
        self._expected: set[str] = set()
        self._ready = asyncio.Event()

    def expect(self, addresses) -> None:
        self._expected = set(addresses)
        for a in self._expected:
            self.register(a, None)
        if not self._expected:
            self._ready.set()

    async def on_connect(self, reader, writer) -> None:
        try:
            hello = Envelope.loads(await reader.readline())
            if hello.msg_type != m.HELLO or hello.sender not in self._expected:
                raise MalformedEnvelope(f"unexpected greeting from {hello.sender}")
            self.boot[hello.sender] = await _read_batch(reader)
        except (MalformedEnvelope, ConnectionError) as exc:
            log.warning("rejecting connection: %s", exc)
            writer.close()
            return
        self.agents[hello.sender] = RemoteEndpoint(hello.sender, reader, writer)
        if set(self.boot) >= self._expected:
            self._ready.set()

    async def wait_ready(self) -> None:
        await self._ready.wait()
        for address in sorted(self.boot):
            for env in self.boot[address]:
                self.post(env)

    async def run_async(self) -> None:
        wall = isinstance(self.clock, WallClock)
        if wall and self._queue:
            # connection setup must not count as simulated time
            self.clock.anchor(self._queue[0][0])
        while self._queue:
            t, kind, _, item = heapq.heappop(self._queue)
            if wall:
                await asyncio.sleep(self.clock.seconds_until(t))
                t = max(t, self.clock.now())
            else:
                self.clock.advance_to(t)
            if kind == _CALL:
                item(t)
            elif kind == _EMIT:
                self._emit(item, t)
            else:
                agent = self._accept(item, t)
                if isinstance(agent, RemoteEndpoint):
                    for e in await agent.call(item, t):
                        self.post(e)
                elif agent is not None:
                    self._dispatch(item, t, agent.handle)

    def close(self) -> None:
        for a in self.agents.values():
            if isinstance(a, RemoteEndpoint):
                a.close()


async def serve_agent(agent, host: str, port: int, boot: list[Envelope] = ()) -> None:
    """Client loop: connect, greet, then answer each delivery until the hub hangs up."""
    reader, writer = await asyncio.open_connection(host, port)
    writer.write(_line(_marker(agent.address, m.HELLO)))
    for env in boot:
        writer.write(_line(env))
    writer.write(_line(_marker(agent.address, DONE)))
    await writer.drain()
    ids = m.IdSource(f"{agent.address}/err")
    while True:
        raw = await reader.readline()
        if not raw:
            break
        data = json.loads(raw)
        now = data.pop("delivered_at")
        env = Envelope.from_json(data)
        try:
            out = agent.handle(env, now)
        except (ProtocolError, MalformedEnvelope) as exc:
            out = [Envelope(ids(), env.correlation_id, agent.address, env.sender, m.ERROR, now,
                            {"error": type(exc).__name__, "detail": str(exc)})]
        for e in out:
            writer.write(_line(e))
        writer.write(_line(_marker(agent.address, DONE)))
        await writer.drain()
    writer.close()


async def run_socket_async(world: World, clock: str = "virtual", host: str = "127.0.0.1",
                           port: int = 0, time_scale: float = 1.0) -> SimResult:
    agents = build_agents(world)
    clk = VirtualClock() if clock == "virtual" else WallClock(time_scale)
    bus = SocketBus(world.delays, world.seed, clk)
    bus.register(agents.authority.address, agents.authority)
    bus.register(agents.court.address, agents.court)
    clients = [*agents.cuas, *agents.operators]
    bus.expect(c.address for c in clients)
    server = await asyncio.start_server(bus.on_connect, host, port)
    port = server.sockets[0].getsockname()[1]
    tasks = [asyncio.create_task(serve_agent(c, host, port, c.start() if hasattr(c, "start") else []))
             for c in clients]
    try:
        await bus.wait_ready()
        for e in world.events:
            bus.call_at(e.at, lambda _t, e=e: e.apply(world.registry))
        await bus.run_async()
    finally:
        bus.close()
        await asyncio.gather(*tasks, return_exceptions=True)
        server.close()
        await server.wait_closed()
    errors = [{"at": t, "msg_id": env.msg_id, "error": type(exc).__name__, "detail": str(exc)}
              for t, env, exc in bus.errors]
    return collect(agents, bus.transcript, errors)


def run_socket(world: World, clock: str = "virtual", host: str = "127.0.0.1", port: int = 0,
               time_scale: float = 1.0) -> SimResult:
    return asyncio.run(run_socket_async(world, clock, host, port, time_scale))
