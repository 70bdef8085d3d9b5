import pytest

from icnsim.names import Name
from icnsim.packets import Data, Interest, is_trusted, make_data, signature_tag_of, verify_provenance

A = Name.of("a")
KEY = Name.of("conf1", "alice", "KEY")


def test_tag_deterministic():
    assert signature_tag_of(A, b"x", KEY) == signature_tag_of(A, b"x", KEY)


def test_tag_depends_on_payload():
    assert signature_tag_of(A, b"x", KEY) != signature_tag_of(A, b"y", KEY)


def test_tag_has_no_concatenation_ambiguity():
    # /ab + "" must not collide with /a + "b"-style shifts between fields.
    assert signature_tag_of(Name.of("ab"), b"", KEY) != signature_tag_of(Name.of("a"), b"b", KEY)


def test_verify_built_data_passes():
    assert verify_provenance(make_data(A, b"x", KEY), {KEY})


def test_verify_fails_without_anchor():
    assert not verify_provenance(make_data(A, b"x", KEY), {Name.of("other")})


def test_verify_fails_on_tampered_payload():
    d = make_data(A, b"x", KEY)
    forged = Data(d.name, b"evil", d.freshness, d.key_id, d.signature_tag)
    assert not verify_provenance(forged, {KEY})


def test_anchor_covers_keys_below_it():
    assert is_trusted(KEY, {Name.of("conf1")})
    assert not is_trusted(Name.of("conf2", "KEY"), {Name.of("conf1")})


def test_data_satisfies_prefix_interest():
    d = make_data(Name.of("a", "b"), b"", KEY)
    assert d.satisfies(Interest(Name.of("a"), 1))
    assert d.satisfies(Interest(Name.of("a", "b"), 1))
    assert not d.satisfies(Interest(Name.of("a", "b", "c"), 1))


@pytest.mark.parametrize("kwargs", [dict(nonce=-1), dict(nonce=2**32), dict(lifetime=0), dict(hop_limit=0),
                                    dict(hop_limit=256)])
def test_interest_field_ranges(kwargs):
    args = dict(name=A, nonce=0)
    args.update(kwargs)
    with pytest.raises(ValueError):
        Interest(**args)
