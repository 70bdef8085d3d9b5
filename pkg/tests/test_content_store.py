from hypothesis import given, settings
from hypothesis import strategies as st

from icnsim.forwarder import ContentStore
from icnsim.names import Name
from icnsim.packets import Data

from oracles import LruOracle

KEY = Name.of("k")



def data(i, size):
    return Data(Name.of("s", str(i)), b"\0" * size, 10**9, KEY)


def test_eviction_order():
    cs = ContentStore(30)
    for i in range(3):
        cs.insert(data(i, 10), 0)
    cs.lookup(Name.of("s", "0"), 1)
    cs.insert(data(3, 10), 2)
    assert sorted(str(n) for n in cs.names()) == ["/s/0", "/s/2", "/s/3"]


def test_oversized_item_not_stored():
    cs = ContentStore(5)
    cs.insert(data(0, 6), 0)
    assert len(cs) == 0 and cs.used == 0


def test_prefix_lookup_finds_longer_name():
    cs = ContentStore(100)
    cs.insert(data(7, 3), 0)
    assert cs.lookup(Name.of("s"), 1).name == Name.of("s", "7")
    assert cs.lookup(Name.of("t"), 1) is None


def test_reinsert_replaces():
    cs = ContentStore(100)
    cs.insert(data(1, 10), 0)
    cs.insert(data(1, 20), 1)
    assert cs.used == 20 and len(cs) == 1


@settings(max_examples=150, deadline=None)
@given(st.integers(0, 100), st.lists(st.tuples(st.booleans(), st.integers(0, 9), st.integers(0, 30)), max_size=80))
def test_matches_lru_oracle(capacity, ops):
    cs, oracle = ContentStore(capacity), LruOracle(capacity)
    for t, (is_get, key, size) in enumerate(ops):
        name = Name.of("s", str(key))
        if is_get:
            assert (cs.lookup(name, t) is not None) == oracle.get(key)
        else:
            cs.insert(data(key, size), t)
            oracle.put(key, size)
        assert [int(n.components[1]) for n in cs.names()] == list(oracle.items)
