"""Wiring: build agents for a world description and run them on a transport."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

from ..clarify import Authority, AuthorityConfig, ProtocolSession, RiskPolicy
from ..domain import DroneId, OperatorId
from ..messages import Envelope
from ..registry import Registry
from .agents import (
    AuthorityAgent, ClarificationSample, CourtAgent, CuasAgent, CuasConfig, DetectionScript,
    OperatorAgent, OperatorScript,
)
from .transport import DelayModel, InProcBus, transcript_line


@dataclass(frozen=True)
class FaultEvent:
    at: int
    kind: str
    drone_id: str
    active: bool = True

    def apply(self, registry: Registry) -> None:
        registry.set_fault(self.kind, DroneId(self.drone_id), self.active)


@dataclass
class World:
    registry: Registry
    cuas: list[tuple[CuasConfig, list[DetectionScript]]]
    operators: dict[OperatorId, OperatorScript] = field(default_factory=dict)
    delays: DelayModel = field(default_factory=DelayModel)
    authority_config: AuthorityConfig = field(default_factory=AuthorityConfig)
    risk: RiskPolicy = field(default_factory=RiskPolicy)
    mission_criticality: dict[str, str] = field(default_factory=dict)
    events: list[FaultEvent] = field(default_factory=list)
    seed: int = 0

    def effective_authority_config(self) -> AuthorityConfig:
        d = self.delays
        return dataclasses.replace(
            self.authority_config,
            processing_ms=d.authority_processing_ms, service_ms=d.authority_service_ms,
            db_check_ms=d.authority_db_check_ms, risk_ms=d.risk_ms, fast_risk_ms=d.fast_risk_ms)


@dataclass
class Agents:
    authority: AuthorityAgent
    court: CourtAgent
    cuas: list[CuasAgent]
    operators: list[OperatorAgent]

    def all(self):
        return [self.authority, self.court, *self.cuas, *self.operators]


def build_agents(world: World) -> Agents:
    authority = Authority(world.registry, world.effective_authority_config(), world.risk,
                          mission_criticality=world.mission_criticality)
    cuas = [CuasAgent(i, world.registry, cfg, scripts, world.delays)
            for i, (cfg, scripts) in enumerate(world.cuas)]
    ops = [OperatorAgent(op, script, world.seed) for op, script in
           sorted(world.operators.items(), key=lambda kv: kv[0].hex())]
    return Agents(AuthorityAgent(authority), CourtAgent(), cuas, ops)


@dataclass
class SimResult:
    samples: list[ClarificationSample]
    sessions: list[ProtocolSession]
    transcript: list[tuple[int, Envelope]]
    audit: list[dict]
    court: list[dict]
    errors: list[dict]
    outcomes: dict[str, str]
    duration_ms: int

    def transcript_lines(self) -> list[str]:
        return [transcript_line(t, e) for t, e in self.transcript]

    def session_outcomes(self) -> list[tuple[str, int, str, str]]:
        """(drone, protocol, case, decision kind) in a transport-independent order."""
        return sorted((s.drone_id.value, s.protocol, s.case_label or "-",
                       s.outcome.kind.value if s.outcome else "-") for s in self.sessions)


def collect(agents: Agents, transcript: list[tuple[int, Envelope]],
            errors: list[dict]) -> SimResult:
    samples = sorted((x for c in agents.cuas for x in c.samples), key=lambda x: x.drone_id)
    outcomes = {d: t.outcome or "-" for c in agents.cuas for d, t in c.tracks.items()}
    errors = errors + [e for c in agents.cuas for e in c.errors]
    detected = {d: t.detected_at for c in agents.cuas for d, t in c.tracks.items()}
    ends = [detected[x.drone_id] + x.delta_ms for x in samples]
    # first detection to last decision
    duration = max(ends) - min(detected.values()) if ends else 0
    sessions = sorted(agents.authority.authority.sessions.values(), key=lambda s: s.opened_at)
    return SimResult(samples, sessions, transcript, list(agents.authority.authority.audit),
                     agents.court.records, errors, outcomes, duration)


def attach(bus: InProcBus, agent) -> None:
    bus.register(agent.address, agent)


run_authority = run_operator = attach


def run_cuas(bus: InProcBus, agent: CuasAgent) -> None:
    attach(bus, agent)
    for env in agent.start():
        bus.post(env)


def run_inproc(world: World, until: int | None = None) -> SimResult:
    bus = InProcBus(world.delays, seed=world.seed)
    agents = build_agents(world)
    run_authority(bus, agents.authority)
    attach(bus, agents.court)
    for op in agents.operators:
        run_operator(bus, op)
    for c in agents.cuas:
        run_cuas(bus, c)
    for e in world.events:
        bus.call_at(e.at, lambda _t, e=e: e.apply(world.registry))
    bus.run(until=until)
    errors = [{"at": t, "msg_id": env.msg_id, "error": type(exc).__name__, "detail": str(exc)}
              for t, env, exc in bus.errors]
    return collect(agents, bus.transcript, errors)
