import pytest
from hypothesis import given, settings, strategies as st

from cuasutm import messages as m
from cuasutm.domain import DecisionKind as D
from cuasutm.messages import Envelope
from cuasutm.netsim import (
    DelayModel, Dist, InProcBus, OperatorScript, UnknownAgent, VirtualClock, run_inproc,
)
from cuasutm.netsim.sim import build_agents
from cuasutm.netsim.sockets import run_socket
from cuasutm.messages import OperatorResponse as R

from support import profile, scenario, simulate


# -- channels ----------------------------------------------------------------------

def _pair(delays=None):
    bus = InProcBus(delays or DelayModel())
    bus.register("cuas:0")
    bus.register("authority")
    a, b = bus.open_channel("cuas:0", "authority")
    return bus, a, b


def test_loopback_fidelity():
    bus, a, b = _pair()
    sent = a.send("UNKNOWN ID", {"drone_id": "X", "nested": {"k": [1, 2]}}, "c1")
    bus.run()
    t, got = b.recv()
    assert got == sent


def test_two_sends_arrive_in_order():
    bus, a, b = _pair(DelayModel(default_latency=Dist(0, 40)))
    first = a.send("ONE", at=0)
    second = a.send("TWO", at=0)
    bus.run()
    assert [b.recv()[1].msg_id for _ in range(2)] == [first.msg_id, second.msg_id]


def test_virtual_edge_delay_is_exact():
    bus, a, b = _pair(DelayModel(default_latency=Dist(50)))
    for at in (0, 7, 1234):
        a.send("PING", at=at)
    bus.run()
    arrivals = [b.recv()[0] for _ in range(3)]
    assert arrivals == [50, 57, 1284]


def test_duplex_reply():
    bus, a, b = _pair(DelayModel(default_latency=Dist(50)))
    a.send("PING", at=0)
    bus.run()
    b.send("PONG", at=bus.clock.now())
    bus.run()
    t, env = a.recv()
    assert (t, env.msg_type) == (100, "PONG")


def test_unknown_agent():
    bus = InProcBus()
    bus.register("cuas:0")
    with pytest.raises(UnknownAgent):
        bus.open_channel("cuas:0", "operator:00")
    a = bus.open_channel("cuas:0", "cuas:0")[0]
    a.remote = "court"
    with pytest.raises(UnknownAgent):
        a.send("X")


def test_virtual_clock_only_moves_forward():
    clock = VirtualClock(10)
    clock.advance(5)
    assert clock.now() == 15
    with pytest.raises(ValueError):
        clock.advance_to(3)


sends = st.lists(st.tuples(st.sampled_from(["cuas:0", "cuas:1", "operator:aa"]),
                           st.sampled_from(["authority", "court"]),
                           st.integers(0, 50)), min_size=1, max_size=60)


@settings(max_examples=150)
@given(sends, st.integers(0, 2**32))
def test_fifo_per_pair(script, seed):
    delays = DelayModel(latency={("cuas", "authority"): Dist(0, 300),
                                 ("operator", "authority"): Dist(5, 25)},
                        default_latency=Dist(0, 80))
    bus = InProcBus(delays, seed=seed)
    for name in ("cuas:0", "cuas:1", "operator:aa", "authority", "court"):
        bus.register(name)
    t = {"cuas:0": 0, "cuas:1": 0, "operator:aa": 0}
    order: dict[tuple[str, str], list[str]] = {}
    for i, (src, dst, gap) in enumerate(script):
        t[src] += gap
        env = Envelope(f"m{i}", "-", src, dst, "X", t[src], {})
        bus.post(env)
        order.setdefault((src, dst), []).append(env.msg_id)
    bus.run()
    got: dict[tuple[str, str], list[str]] = {}
    for _, env in bus.transcript:
        got.setdefault((env.sender, env.recipient), []).append(env.msg_id)
    assert got == order


# -- agents ------------------------------------------------------------------------

GREEN = profile("green", path="green")


def test_cooperative_drone_opens_nothing():
    result, _ = simulate(scenario(dict(GREEN, rechecks=2)))
    assert result.samples == [] and result.sessions == []
    assert result.outcomes == {"green-0000": "Compliant"}


def test_missing_rid_with_potential_operator_opens_p1():
    sc = scenario(profile("p1", 1, "CASE4", rid=False, operator={"response": "CannotRestore"}))
    result, _ = simulate(sc)
    assert [(s.protocol, s.case_label) for s in result.sessions] == [(1, "CASE4")]
    first_open = next(e for _, e in result.transcript if e.msg_type in m.PROTOCOL_OF_OPEN)
    assert first_open.msg_type == m.OPEN_LABELS[1]
    assert "operator_id" in first_open.payload


def test_fake_token_is_interdicted_locally():
    result, _ = simulate(scenario(profile("fake", path="local", authentic=False)))
    types = [e.msg_type for _, e in result.transcript if e.msg_type != m.TIMER]
    assert types == [m.INTERDICTION_REPORT, m.LAWSUIT]
    assert result.sessions == [] and result.samples == []
    assert result.outcomes["fake-0000"] == "local:FakeId"


def test_no_rid_and_nobody_authorized_is_interdicted_locally():
    result, _ = simulate(scenario(profile("dark", path="local", rid=False, authorized=False)))
    assert result.outcomes["dark-0000"] == "local:NoIdNoPotentialOperator"


def test_restored_id_after_two_seconds():
    sc = scenario(profile("r", 1, "CASE5", rid=False, restores_rid=True,
                          operator={"response": "RestoredId", "think_ms": 2000}))
    result, _ = simulate(sc)
    s = result.sessions[0]
    assert (s.case_label, s.outcome.kind) == ("CASE5", D.RESTORATION_CONFIRMED)
    # once restored the drone walks the green checks
    assert result.outcomes["r-0000"] == D.RESTORATION_CONFIRMED.value


@pytest.mark.parametrize("p,kw,kind", [
    (1, dict(rid=False), D.IMMEDIATE_INTERDICTION),
    (7, dict(area="outside"), D.TIMED_INTERDICTION),
    (8, dict(window="ended"), D.TIMED_INTERDICTION),
])
def test_silent_operator_gives_case1(p, kw, kind):
    result, _ = simulate(scenario(profile("s", p, "CASE1", **kw)))
    s = result.sessions[0]
    assert (s.protocol, s.case_label, s.outcome.kind) == (p, "CASE1", kind)


def test_cross_protocol_answer_is_surfaced():
    sc = scenario(profile("x", 7, "CASE1", area="outside"))
    world, _ = sc.build(sc.groups[0], 1)
    op = next(iter(world.operators))
    world.operators[op] = OperatorScript.answering(R.STOPPED_MISSION, 100, protocols=(7,))
    result = run_inproc(world)
    assert [e["error"] for e in result.errors] == ["IllegalResponse"]
    # the session still ends, through the operator timeout
    assert result.sessions[0].case_label == "CASE1"


def test_malformed_envelope_gets_error_and_loop_continues():
    sc = scenario(profile("u", 2, "CASE1", registered=False, authorized=False))
    world, _ = sc.build(sc.groups[0], 1)
    agents = build_agents(world)
    bus = InProcBus(world.delays)
    bus.register(agents.authority.address, agents.authority)
    bus.register(agents.court.address, agents.court)
    bus.register("cuas:9")
    bus.post(Envelope("junk-1", "j", "cuas:9", "authority", "HELLO THERE", 0, {}))
    bus.post(Envelope("junk-2", "j2", "cuas:9", "authority", "UNKNOWN ID", 0, {"no": "drone"}))
    bus.post(Envelope("ok-1", "s1", "cuas:9", "authority", "UNKNOWN ID", 5, {"drone_id": "u-0000"}))
    bus.run()
    inbox = [e for _, e in bus.mailboxes["cuas:9"]]
    errors = [e for e in inbox if e.msg_type == m.ERROR]
    assert [e.payload["msg_id"] for e in errors] == ["junk-1", "junk-2"]
    assert any("decision" in e.payload and e.correlation_id == "s1" for e in inbox)


def test_lost_drone_cancels_session():
    sc = scenario(profile("gone", 7, "CASE1", area="outside", lost_after_ms=1500))
    result, _ = simulate(sc)
    s = result.sessions[0]
    assert (s.case_label, s.outcome.kind) == ("CANCELLED", D.CANCELLED)
    assert result.outcomes["gone-0000"] == D.CANCELLED.value


def test_many_simultaneous_opens_all_decided():
    sc = scenario(profile("p2", 2, "CASE2", authorized=False, faults=["id_db_miss"]), counts=(250,))
    result, _ = simulate(sc)
    assert len(result.sessions) == 250
    assert all(s.decided_at is not None for s in result.sessions)
    assert len(result.samples) == 250


def test_non_blocking_authority():
    sc = scenario(profile("p7", 7, "CASE3", area="outside",
                          operator={"response": "CannotReturn", "think_ms": 1000}),
                  counts=(50,), delays={"preset": "paper", "authority_service_ms": 0},
                  authority={"operator_timeout_ms": 120_000})
    baseline, _ = simulate(sc, count=1)
    single = baseline.samples[0].delta_ms
    world, _ = sc.build(sc.groups[0], 50)
    slow_op = min(world.operators, key=lambda o: o.hex())
    world.operators[slow_op] = OperatorScript.answering(R.CANNOT_RETURN, 60_000)
    result = run_inproc(world)
    slow = [x for x in result.samples if x.drone_id == "p7-0000"]
    fast = [x for x in result.samples if x.drone_id != "p7-0000"]
    assert len(fast) == 49 and slow[0].delta_ms > 60_000
    assert max(x.delta_ms for x in fast) == single


def test_operator_reply_waits_think_time():
    sc = scenario(profile("t", 7, "CASE3", area="outside",
                          operator={"response": "CannotReturn", "think_ms": [1500, 1500]}),
                  delays="zero")
    result, _ = simulate(sc)
    assert result.samples[0].delta_ms == 1500


# -- determinism and transports ------------------------------------------------------

MIXED = [
    profile("a", 1, "CASE3", rid=False, operator={"response": "AlreadyTransmitting",
                                                  "think_ms": [500, 3000]}),
    profile("b", 3, "CASE2", faults=["id_db_miss"], repair_after_ms=500),
    profile("c", 7, "CASE4", area="outside", returns=True,
            operator={"response": "ReturnedToArea", "think_ms": [800, 2500]}),
    profile("d", 6, "CASE2", authorized=False, mission="critical"),
    profile("e", path="green", rechecks=1),
]
RISK = {"default": "Low", "rules": [{"mission": "critical", "risk": "High"}]}


def test_same_seed_same_bytes():
    sc = scenario(*MIXED, counts=(20,), risk=RISK)
    one, expects = simulate(sc, seed=99)
    two, _ = simulate(sc, seed=99)
    assert one.transcript_lines() == two.transcript_lines()
    from cuasutm.bench.sweep import check_expectations
    assert check_expectations(one, expects) == []


def test_different_seed_changes_sampled_timings():
    sc = scenario(*MIXED, counts=(20,), risk=RISK)
    one, _ = simulate(sc, seed=1)
    two, _ = simulate(sc, seed=2)
    assert one.session_outcomes() == two.session_outcomes()
    assert one.transcript_lines() != two.transcript_lines()


def test_socket_transport_matches_inproc():
    sc = scenario(*MIXED, counts=(10,), risk=RISK)
    world, _ = sc.build(sc.groups[0], 10)
    inproc = run_inproc(world)
    world, _ = sc.build(sc.groups[0], 10)
    sock = run_socket(world)
    assert sock.session_outcomes() == inproc.session_outcomes()
    assert sock.transcript_lines() == inproc.transcript_lines()


def test_socket_transport_on_wall_clock():
    sc = scenario(*MIXED, counts=(5,), risk=RISK)
    world, _ = sc.build(sc.groups[0], 5)
    inproc = run_inproc(world)
    world, _ = sc.build(sc.groups[0], 5)
    wall = run_socket(world, clock="wall", time_scale=0.05)
    # real time keeps outcomes but not the interleaving of near-simultaneous decisions;
    # scales much below 0.01 let interpreter overhead outrun the scenario's margins
    assert sorted(wall.session_outcomes()) == sorted(inproc.session_outcomes())
    assert wall.errors == []


def test_delay_model_json_round_trip():
    d = DelayModel.paper()
    d.latency[("cuas", "authority")] = Dist(10, 30)
    again = DelayModel.from_json(d.to_json())
    assert again == d
    with pytest.raises(ValueError):
        DelayModel.from_json({"risk_ms": -1})
    with pytest.raises(ValueError):
        Dist(5, 1)


def test_effective_config_takes_delays():
    sc = scenario(GREEN, delays={"preset": "paper", "authority_processing_ms": 999},
                  authority={"operator_timeout_ms": 777})
    world, _ = sc.build(sc.groups[0], 1)
    cfg = world.effective_authority_config()
    assert (cfg.processing_ms, cfg.operator_timeout_ms) == (999, 777)
    assert cfg.db_check_ms == DelayModel.paper().authority_db_check_ms
