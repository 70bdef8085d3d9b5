import pytest

from icnsim.errors import InvalidTransition, SimulationError
from icnsim.substrate import (EventEngine, EventKind, LinkQueue, PhysLink, PhysNode, Role, Topology, Ue,
                              serialization_delay, ue_attach, ue_detach)

from helpers import make_sim


def test_serialization_arithmetic():
    # 1000 bytes = 8000 bits at 8 Mbit/s is exactly 1000 us.
    assert serialization_delay(1000, 8_000_000) == 1000
    assert serialization_delay(1, 8_000_000) == 1  # rounded up


def test_deliver_example():
    q = LinkQueue(PhysLink("l", ("a", "b"), latency=1000, bandwidth=8_000_000), "a")
    assert q.deliver(1000, now=500) == 500 + 1000 + 1000


def test_small_packet_dominated_by_latency():
    q = LinkQueue(PhysLink("l", ("a", "b"), latency=1000, bandwidth=1_000_000_000), "a")
    assert q.deliver(3, 0) == 1001


def test_tail_drop():
    q = LinkQueue(PhysLink("l", ("a", "b"), latency=10, bandwidth=8_000, queue_capacity=1), "a")
    assert q.deliver(100, 0) is not None
    assert q.deliver(100, 0) is None
    assert q.dropped == 1


def test_fifo_serialization_back_to_back():
    q = LinkQueue(PhysLink("l", ("a", "b"), latency=10, bandwidth=8_000_000, queue_capacity=4), "a")
    assert [q.deliver(1000, 0) for _ in range(3)] == [1010, 2010, 3010]
    # the queue drains as transmissions complete
    assert q.occupancy(2000) == 1


@pytest.mark.parametrize("kwargs", [dict(latency=0, bandwidth=1), dict(latency=1, bandwidth=0)])
def test_link_validation(kwargs):
    with pytest.raises(ValueError):
        PhysLink("l", ("a", "b"), **kwargs)


def test_topology_paths():
    topo = Topology(
        [PhysNode("A", Role.ICN_BS, 1, 1), PhysNode("R", Role.CORE_ROUTER, 1, 1), PhysNode("D", Role.CLOUD, 1, 1)],
        [PhysLink("A-R", ("A", "R"), 1000, 10**9), PhysLink("R-D", ("R", "D"), 2000, 10**6),
         PhysLink("A-D", ("A", "D"), 5000, 10**9)],
    )
    assert topo.path_latency("A", "D") == 3000
    assert topo.node_path("A", "D") == ["A", "R", "D"]
    assert topo.ue_latency("A", "D") == 1000 + 3000
    assert topo.path_bandwidth("A", "D") == 10**6
    assert str(topo.nodes["A"].locator_prefix) == "/poa/A"
    assert topo.nodes["R"].locator_prefix is None


def test_empty_engine_run():
    snap = EventEngine().run_until(100)
    assert snap.events_processed == 0 and snap.counters == {} and snap.now == 100


def test_ties_in_insertion_order():
    engine, seen = EventEngine(), []
    for i in range(5):
        engine.schedule(7, EventKind.TIMER_FIRE, seen.append, i)
    engine.run_until(10)
    assert seen == [0, 1, 2, 3, 4]


def test_events_processed_in_time_order():
    engine, seen = EventEngine(), []
    for t in (30, 10, 20):
        engine.schedule(t, EventKind.TIMER_FIRE, seen.append, t)
    engine.run_until(25)
    assert seen == [10, 20]
    engine.run_until(30)
    assert seen == [10, 20, 30]


def test_past_event_is_a_bug():
    engine = EventEngine()
    engine.run_until(50)
    with pytest.raises(SimulationError):
        engine.schedule(10, EventKind.TIMER_FIRE, lambda: None)


def test_cancelled_event_skipped():
    engine, seen = EventEngine(), []
    ev = engine.schedule(1, EventKind.TIMER_FIRE, seen.append, "x")
    ev.cancel()
    assert engine.run_until(5).events_processed == 0 and seen == []


def test_attach_state_machine():
    ue = Ue("u")
    ue_attach(ue, "A", 0)
    with pytest.raises(InvalidTransition):
        ue_attach(ue, "B", 1)
    ue_detach(ue, 2)
    with pytest.raises(InvalidTransition):
        ue_detach(ue, 3)


def _ue_faces(sim, poa):
    base = sim.base_forwarder(poa)
    return sum(1 for ch in sim.channels.values()
               if base in (ch.a, ch.b) and any(getattr(ep, "on_ue", False) for ep in (ch.a, ch.b)))


def test_three_poa_walk_face_counts():
    sim = make_sim("""
        - {at: 0, action: submit_intent, service: base}
        - {at: 10, action: ue_attach, ue: u, poa: A}
        - {at: 20, action: ue_move, ue: u, poa: B, gap: 5}
        - {at: 40, action: ue_move, ue: u, poa: C, gap: 5}
    """, ues=["u"], duration=100)
    sim.run_until(100)
    assert [_ue_faces(sim, p) for p in "ABC"] == [0, 0, 1]
    events = [(r["event"], r["poa"]) for r in sim.trace.of_kind("ue")]
    assert events == [("attach", "A"), ("detach", "A"), ("attach", "B"), ("detach", "B"), ("attach", "C")]


def test_attach_requires_poa_with_base_forwarder():
    from icnsim.errors import PreconditionError
    sim = make_sim("- {at: 0, action: submit_intent, service: base}", ues=["u"], duration=10)
    sim.run_until(10)
    with pytest.raises(PreconditionError):
        sim.attach("u", "R")
