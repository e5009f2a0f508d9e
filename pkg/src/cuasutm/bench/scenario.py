"""Scenario files: validation and materialization into simulation worlds.

A scenario holds groups of drone profiles. For a given drone count each
group is run on its own, with drones assigned to the group's profiles
round-robin. A profile fully determines the registry rows, faults, detection
script and operator behavior of every drone built from it, plus the outcome
that drone is meant to provoke.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import jsonschema

from ..clarify import AuthorityConfig, ConfirmationMode, RiskPolicy
from ..domain import DroneId, GeoPoint, OperatorId, TimeWindow, Zone
from ..messages import LEGAL_RESPONSES, OperatorResponse
from ..netsim import (
    CuasConfig, DelayModel, DetectionScript, Dist, FaultEvent, OperatorScript, World,
)
from ..registry import AccessLevel, FaultInjection, IdRecord, MissionAuthorization, Registry

SCHEMA_VERSION = 1
CELL = 0.01
GRID = 100
CUAS_ZONE = Zone.rectangle(0.0, 0.0, 1.0, 1.0)
FAR_OFFSET = 5.0
FOREVER = 10**13


class ScenarioInvalid(ValueError):
    pass


def schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("data/scenario.schema.json").read_text())


def builtin(name: str) -> Path:
    return Path(str(resources.files(__package__).joinpath(f"data/{name}.json")))


@dataclass(frozen=True)
class Expect:
    protocol: int | None
    case: str | None
    path: str  # "protocol", "green" or "local"

    @classmethod
    def from_json(cls, v) -> Expect:
        if isinstance(v, str):
            return cls(None, None, v)
        return cls(int(v["protocol"]), v["case"], "protocol")

    def to_json(self):
        return self.path if self.protocol is None else {"protocol": self.protocol, "case": self.case}


@dataclass(frozen=True)
class Profile:
    name: str
    expect: Expect
    registered: bool = True
    expired: bool = False
    authorized: bool = True
    area: str = "inside"
    window: str = "active"
    faults: tuple[str, ...] = ()
    rid: bool = True
    authentic: bool = True
    restores_rid: bool = False
    returns: bool = False
    stops: bool = False
    emergency: bool = False
    mission: str = "routine"
    rechecks: int = 0
    lost_after_ms: int | None = None
    repair_after_ms: int | None = None
    response: OperatorResponse | None = None
    think: Dist | None = None

    @classmethod
    def from_json(cls, d: dict) -> Profile:
        kw = {k: d[k] for k in ("registered", "expired", "authorized", "area", "window", "rid",
                                 "authentic", "restores_rid", "returns", "stops", "emergency",
                                 "mission", "rechecks", "lost_after_ms", "repair_after_ms") if k in d}
        op = d.get("operator")
        if op is not None:
            kw["response"] = OperatorResponse(op["response"])
            if "think_ms" in op:
                kw["think"] = Dist.from_json(op["think_ms"])
        return cls(d["name"], Expect.from_json(d["expect"]), faults=tuple(d.get("faults", ())), **kw)

    def check(self) -> None:
        p = self.expect.protocol
        if self.expired and not self.registered:
            raise ScenarioInvalid(f"profile {self.name}: an unregistered drone cannot be expired")
        if not self.registered and self.faults:
            raise ScenarioInvalid(f"profile {self.name}: faults need a registered drone")
        if self.repair_after_ms is not None and not self.faults:
            raise ScenarioInvalid(f"profile {self.name}: nothing to repair")
        if self.response is not None and p in LEGAL_RESPONSES and self.response not in LEGAL_RESPONSES[p]:
            raise ScenarioInvalid(
                f"profile {self.name}: {self.response.value} is not an answer in protocol {p}")


@dataclass
class Group:
    name: str
    profiles: list[Profile]


@dataclass
class Scenario:
    name: str
    counts: list[int]
    groups: list[Group]
    seed: int = 0
    clock: str = "virtual"
    time_scale: float = 1.0
    start_ms: int = 10_000
    delays: DelayModel = dataclasses.field(default_factory=DelayModel.paper)
    authority: AuthorityConfig = dataclasses.field(default_factory=AuthorityConfig)
    risk: RiskPolicy = dataclasses.field(default_factory=RiskPolicy)
    zone_criticality: str = "normal"
    confirm: ConfirmationMode = ConfirmationMode.EXPLICIT
    recheck_ms: int = 1000
    access: AccessLevel = AccessLevel.OFFICIALS
    source: dict | None = None

    @classmethod
    def from_json(cls, data: dict) -> Scenario:
        errors = sorted(jsonschema.Draft202012Validator(schema()).iter_errors(data),
                        key=lambda e: list(e.absolute_path))
        if errors:
            e = errors[0]
            where = "/".join(str(x) for x in e.absolute_path) or "<root>"
            raise ScenarioInvalid(f"{where}: {e.message}")
        groups = [Group(g["name"], [Profile.from_json(p) for p in g["profiles"]])
                  for g in data["groups"]]
        seen: set[str] = set()
        for g in groups:
            for p in g.profiles:
                p.check()
                if p.name in seen:
                    raise ScenarioInvalid(f"profile name {p.name} used twice")
                seen.add(p.name)
        if len({g.name for g in groups}) != len(groups):
            raise ScenarioInvalid("group names must be unique")
        if max(data["counts"]) > GRID * GRID:
            raise ScenarioInvalid(f"at most {GRID * GRID} drones fit the detection grid")
        cuas = data.get("cuas", {})
        return cls(
            name=data["name"], counts=list(data["counts"]), groups=groups,
            seed=data.get("seed", 0), clock=data.get("clock", "virtual"),
            time_scale=data.get("time_scale", 1.0), start_ms=data.get("start_ms", 10_000),
            delays=DelayModel.from_json(data.get("delays", "paper")),
            authority=AuthorityConfig(**data.get("authority", {})),
            risk=RiskPolicy.from_json(data.get("risk")),
            zone_criticality=cuas.get("zone_criticality", "normal"),
            confirm=ConfirmationMode(cuas.get("confirm", "Explicit")),
            recheck_ms=cuas.get("recheck_ms", 1000),
            access=AccessLevel[cuas.get("access", "Officials").upper()],
            source=data,
        )

    @classmethod
    def load(cls, path: str | Path) -> Scenario:
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise
        except ValueError as exc:
            raise ScenarioInvalid(f"{path}: not JSON ({exc})") from None
        return cls.from_json(data)

    def group(self, name: str) -> Group:
        for g in self.groups:
            if g.name == name:
                return g
        raise KeyError(name)

    def with_counts(self, counts: list[int]) -> Scenario:
        return dataclasses.replace(self, counts=list(counts))

    # -- materialization -----------------------------------------------------

    def build(self, group: Group, count: int, seed: int | None = None) -> tuple[World, dict[str, Expect]]:
        """A fresh world with ``count`` drones from ``group`` and the outcome each should reach."""
        reg = Registry()
        faults = FaultInjection()
        scripts, operators, expects, criticality, events = [], {}, {}, {}, []
        for i in range(count):
            prof = group.profiles[i % len(group.profiles)]
            drone, op, script = self._drone(reg, faults, prof, i)
            scripts.append(script)
            expects[drone.value] = prof.expect
            criticality[f"AUTH-{drone.value}"] = criticality[drone.value] = prof.mission
            if prof.repair_after_ms is not None:
                events += [FaultEvent(self.start_ms + prof.repair_after_ms, k, drone.value, False)
                           for k in prof.faults]
            if prof.response is not None:
                think = prof.think if prof.think is not None else self.delays.operator_think
                operators[op] = OperatorScript.answering(prof.response, think)
            else:
                operators[op] = OperatorScript.silent()
        reg.faults = faults
        cfg = CuasConfig(CUAS_ZONE, self.access, self.zone_criticality, self.confirm, self.recheck_ms)
        world = World(reg, [(cfg, scripts)], operators, self.delays, self.authority, self.risk,
                      criticality, sorted(events, key=lambda e: e.at),
                      seed=self.seed if seed is None else seed)
        return world, expects

    def _drone(self, reg: Registry, faults: FaultInjection, prof: Profile, i: int):
        drone = DroneId(f"{prof.name}-{i:04d}")
        op = OperatorId.from_int(0x10000 + i)
        row, col = divmod(i, GRID)
        lat0, lon0 = row * CELL, col * CELL
        pos = GeoPoint(lat0 + CELL / 2, lon0 + CELL / 2, 50.0)
        if prof.area == "outside":
            lat0 += FAR_OFFSET
        area = Zone.rectangle(lat0 + CELL / 10, lon0 + CELL / 10,
                              lat0 + CELL * 9 / 10, lon0 + CELL * 9 / 10)
        t0 = self.start_ms
        if prof.registered:
            reg.register_drone(IdRecord(drone, op, t0 - 1 if prof.expired else FOREVER))
        if prof.authorized:
            window = TimeWindow(0, t0 - 100) if prof.window == "ended" else TimeWindow(0, FOREVER)
            reg.add_authorization(MissionAuthorization(f"AUTH-{drone.value}", drone, op, window, area))
        for kind in prof.faults:
            getattr(faults, kind).add(drone)
        lat_c, lon_c = (lat0 + CELL / 2, lon0 + CELL / 2)
        script = DetectionScript(
            drone.value, t0, pos, rid=prof.rid, authentic=prof.authentic,
            emergency=prof.emergency, restores_rid=prof.restores_rid,
            returns_to=GeoPoint(lat_c, lon_c, 50.0) if prof.returns else None,
            stops=prof.stops,
            lost_at=t0 + prof.lost_after_ms if prof.lost_after_ms is not None else None,
            rechecks=prof.rechecks)
        return drone, op, script
