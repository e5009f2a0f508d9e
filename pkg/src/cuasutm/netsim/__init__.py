"""Transports and agents for the CUAS / authority / operator message exchange."""

from ..messages import AgentId, Envelope, MalformedEnvelope, Role
from .agents import (
    AuthorityAgent, ClarificationSample, CourtAgent, CuasAgent, CuasConfig, DetectionScript,
    OperatorAgent, OperatorScript,
)
from .sim import (
    FaultEvent, SimResult, World, build_agents, run_authority, run_cuas, run_inproc,
    run_operator,
)
from .transport import (
    Channel, DelayModel, Dist, InProcBus, UnknownAgent, VirtualClock, WallClock, transcript_line,
)

__all__ = [
    "AgentId", "AuthorityAgent", "Channel", "ClarificationSample", "CourtAgent", "CuasAgent",
    "CuasConfig", "DelayModel", "DetectionScript", "Dist", "Envelope", "FaultEvent", "InProcBus",
    "MalformedEnvelope", "OperatorAgent", "OperatorScript", "Role", "SimResult", "UnknownAgent",
    "VirtualClock", "WallClock", "World", "build_agents", "run_authority", "run_cuas",
    "run_inproc", "run_operator", "transcript_line",
]
