import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from icnsim.errors import ResolutionFailed
from icnsim.mobility import Msa, Nrs, UpdateResult, handover
from icnsim.packets import Interest

from helpers import CONF_SETUP, make_sim, n
from oracles import NrsOracle

ACCEPTED, STALE = UpdateResult.ACCEPTED, UpdateResult.STALE_SEQ

MOBILE_SETUP = CONF_SETUP + """
- {at: 200, action: ue_attach, ue: alice, poa: A}
- {at: 200, action: ue_attach, ue: bob, poa: C}
- {at: 1000, action: join_conference, ue: alice, slice: conf1}
- {at: 1000, action: join_conference, ue: bob, slice: conf1}
"""


# -- NRS ------------------------------------------------------------------------------


def test_register_then_update():
    nrs = Nrs()
    assert nrs.register(n("/conf/alice"), n("/poa/A"), 1) is ACCEPTED
    assert nrs.resolve(n("/conf/alice")) == n("/poa/A")
    assert nrs.register(n("/conf/alice"), n("/poa/B"), 2) is ACCEPTED
    assert nrs.records[n("/conf/alice")].previous_locator == n("/poa/A")
    assert nrs.register(n("/conf/alice"), n("/poa/A"), 1) is STALE
    assert nrs.records[n("/conf/alice")].locator == n("/poa/B")


def test_resolve_longest_registered_prefix():
    nrs = Nrs()
    nrs.register(n("/conf/alice"), n("/poa/B"), 1)
    assert nrs.resolve(n("/conf/alice/video/seg9")) == n("/poa/B")
    assert nrs.resolve(n("/conf/carol")) is None


def test_deregister():
    nrs = Nrs()
    nrs.register(n("/conf/alice"), n("/poa/A"), 2)
    assert nrs.deregister(n("/conf/alice"), 2) is STALE
    assert nrs.deregister(n("/conf/alice"), 3) is ACCEPTED
    assert nrs.resolve(n("/conf/alice")) is None


def test_deregister_unknown_is_tombstone():
    nrs = Nrs()
    assert nrs.deregister(n("/conf/zed"), 4) is ACCEPTED
    assert nrs.register(n("/conf/zed"), n("/poa/A"), 4) is STALE
    assert nrs.register(n("/conf/zed"), n("/poa/A"), 5) is ACCEPTED


def test_previous_locator_never_equals_locator():
    nrs = Nrs()
    nrs.register(n("/x"), n("/poa/A"), 1)
    nrs.register(n("/x"), n("/poa/B"), 2)
    nrs.register(n("/x"), n("/poa/B"), 3)
    rec = nrs.records[n("/x")]
    assert rec.previous_locator == n("/poa/A") != rec.locator


NAMES = [n(x) for x in ("/c/a", "/c/b", "/c/a/v", "/d", "/d/e/f")]
LOCS = [n(x) for x in ("/poa/A", "/poa/B", "/poa/C")]
ops = st.lists(st.tuples(st.sampled_from(["register", "deregister", "resolve"]), st.integers(0, len(NAMES) - 1),
                         st.integers(0, 8), st.integers(0, 2)), max_size=60)


@settings(max_examples=200)
@given(ops)
def test_nrs_matches_replayed_map(seq_ops):
    nrs, oracle = Nrs(), NrsOracle()
    for op, i, seq, j in seq_ops:
        name = NAMES[i]
        if op == "resolve":
            probe = name.append("chunk", "1")
            assert nrs.resolve(probe) == oracle.resolve(probe)
        elif op == "register":
            assert nrs.register(name, LOCS[j], seq).value == oracle.apply("register", name, seq, LOCS[j])
        else:
            assert nrs.deregister(name, seq).value == oracle.apply("deregister", name, seq)
    for name in NAMES:
        assert nrs.resolve(name) == oracle.resolve(name)


@settings(max_examples=100)
@given(st.integers(2, 30), st.integers(0, 2**32 - 1))
def test_stale_reordering_rejected(count, seed):
    rng = random.Random(seed)
    nrs = Nrs()
    for seq in range(1, count + 1):
        nrs.register(n("/m"), LOCS[seq % 3], seq)
    for _ in range(10):
        old = rng.randint(0, count)
        assert nrs.register(n("/m"), LOCS[0], old) is STALE
        assert nrs.deregister(n("/m"), old) is STALE
    assert nrs.records[n("/m")].seq == count


# -- MSA ------------------------------------------------------------------------------


def test_msa_attaches_hint_keeps_name():
    nrs = Nrs()
    nrs.register(n("/conf/alice"), n("/poa/B"), 1)
    msa = Msa(nrs)
    i = Interest(n("/conf/alice/seg1"), 9)
    out = msa.resolve(i)
    assert out.name == i.name and out.nonce == i.nonce
    assert out.forwarding_hint == n("/poa/B")
    assert (msa.calls, msa.signaling_messages) == (1, 2)


def test_msa_unregistered_fails():
    with pytest.raises(ResolutionFailed):
        Msa(Nrs()).resolve(Interest(n("/conf/carol/1"), 1))


def test_msa_requires_unhinted_interest():
    with pytest.raises(ValueError):
        Msa(Nrs()).resolve(Interest(n("/conf/a"), 1, forwarding_hint=n("/poa/A")))


# -- late binding in the running system ----------------------------------------------------


def test_resolved_interest_routes_on_hint():
    sim = make_sim(MOBILE_SETUP + """
- {at: 50000, action: enable_mobility, slice: conf1, prefixes: [/conf1/bob]}
- {at: 60000, action: start_fetch, ue: alice, target: /conf1/bob, count: 1}
""", ("alice", "bob"))
    sim.run_until(500_000)
    assert sim.trace.count("msa_resolve", result="/poa/C") == 1
    hinted = [r for r in sim.trace.of_kind("interest_fwd") if r["hint"] == "/poa/C"]
    assert hinted and all(r["name"] == "/conf1/bob/video/0" for r in hinted)
    # Once the hint is on, no further forwarder asks for resolution.
    assert sim.trace.count("resolve_invoke") == 1
    assert sim.trace.count("c_data") == 1


def _handover_sim(extra="", grace=500_000):
    return make_sim(MOBILE_SETUP + """
- {at: 50000, action: enable_mobility, slice: conf1, prefixes: [/conf1/bob]}
- {at: 100000, action: start_fetch, ue: alice, target: /conf1/bob, rate: 50, lifetime: 200000}
- {at: 1000000, action: ue_move, ue: bob, poa: B, gap: 50000}
""" + extra, ("alice", "bob"), config=f"grace: {grace}")


def test_handover_event_order():
    sim = _handover_sim()
    sim.run_until(1_300_000)
    recs = sim.trace.records

    def first(pred):
        return next(i for i, r in enumerate(recs) if pred(r))

    detach = first(lambda r: r["kind"] == "ue" and r["event"] == "detach")
    attach = first(lambda r: r["kind"] == "ue" and r["event"] == "attach" and r["poa"] == "B")
    reg = first(lambda r: r["kind"] == "nrs" and r["op"] == "register" and r["locator"] == "/poa/B")
    notify = first(lambda r: r["kind"] == "signal" and r["msg"] == "notify")
    redirect = first(lambda r: r["kind"] == "redirect_installed")
    assert detach < attach < reg < notify < redirect
    assert recs[attach]["t"] - recs[detach]["t"] == 50_000
    assert sim.trace.count("signal", msg="notify") == 1
    rec = sim.mobility.nrs.records[n("/conf1/bob")]
    assert (rec.locator, rec.previous_locator, rec.seq) == (n("/poa/B"), n("/poa/C"), 2)
    entry = recs[redirect]
    assert entry["node"] == sim.base_forwarder("C").id and entry["expiry"] == entry["t"] + 500_000


def test_redirect_used_during_grace():
    sim = _handover_sim()
    sim.run_until(1_200_000)
    base_c = sim.base_forwarder("C")
    # A consumer that still holds the stale locator sends straight to the old PoA.
    stale = Interest(n("/conf1/bob/video/999"), sim.next_nonce(), forwarding_hint=n("/poa/C"))
    gw = sim.orchestrator.slices["conf1"].gateways()[0]
    face = sim.face_between(base_c, sim.endpoints[gw.id])
    base_c.receive(face, stale)
    redirects = [r for r in sim.trace.of_kind("redirect") if r["name"] == "/conf1/bob/video/999"]
    assert redirects and redirects[0]["locator"] == "/poa/B"
    sim.run_until(1_400_000)
    assert sim.trace.count("publish", name="/conf1/bob/video/999") == 1


def test_redirect_expires():
    sim = _handover_sim(grace=100_000)
    sim.run_until(1_500_000)
    base_c = sim.base_forwarder("C")
    stale = Interest(n("/conf1/bob/video/999"), sim.next_nonce(), forwarding_hint=n("/poa/C"))
    gw = sim.orchestrator.slices["conf1"].gateways()[0]
    base_c.receive(sim.face_between(base_c, sim.endpoints[gw.id]), stale)
    assert not [r for r in sim.trace.of_kind("redirect") if r["name"] == "/conf1/bob/video/999"]
    assert n("/conf1/bob") not in base_c.fwd.redirects
    # Fresh Interests (no hint) still reach bob through resolution at the gateway.
    mark = sim.now
    sim.ues["alice"].app.start_fetch(n("/conf1/bob"), count=2, start_seq=500)
    sim.run_until(2_000_000)
    assert [r for r in sim.trace.of_kind("msa_resolve") if r["t"] >= mark and r["result"] == "/poa/B"]
    assert sim.trace.count("c_data", flow="alice->/conf1/bob#2") == 2


def test_handover_without_mobility_breaks_flow():
    sim = make_sim(MOBILE_SETUP + """
- {at: 100000, action: start_fetch, ue: alice, target: /conf1/bob, rate: 50, lifetime: 200000}
- {at: 1000000, action: ue_move, ue: bob, poa: B, gap: 50000}
""", ("alice", "bob"))
    sim.run_until(3_000_000)
    assert not [r for r in sim.trace.of_kind("c_data") if r["t"] > 1_000_000]
    assert sim.trace.count("signal") == 0


def test_handover_helper_delegates():
    sim = _handover_sim()
    sim.run_until(500_000)
    handover(sim, "alice", "B", 10_000)
    sim.run_until(520_000)
    assert sim.ues["alice"].ue.attached_poa == "B"


def test_disruption_bound():
    sim = _handover_sim()
    sim.run_until(3_000_000)
    flow = sim.ues["alice"].app.flows["alice->/conf1/bob"]
    # gap <= G = 50 ms, lifetime 200 ms: ceil(G / lifetime) + 1 = 2
    assert flow.timeouts <= 2
    assert not flow.lost
