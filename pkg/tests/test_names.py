import pytest
from hypothesis import given
from hypothesis import strategies as st

from icnsim.names import Name, as_name, name_is_prefix, overlaps

components = st.text(alphabet=st.characters(blacklist_characters="/", blacklist_categories=("Cs",)),
                     min_size=1, max_size=6)
names = st.lists(components, min_size=1, max_size=6).map(lambda c: Name(tuple(c)))


@pytest.mark.parametrize("prefix,full,expected", [
    ("/a/b", "/a/b/c", True),
    ("/a/b", "/a/b", True),
    ("/a/bc", "/a/b/c", False),
    ("/a/b/c", "/a/b", False),
])
def test_name_is_prefix_examples(prefix, full, expected):
    assert name_is_prefix(Name.parse(prefix), Name.parse(full)) is expected


@pytest.mark.parametrize("bad", ["", "a/b", "/", "/a//b", "/a/"])
def test_parse_rejects_invalid(bad):
    with pytest.raises(ValueError):
        Name.parse(bad)


def test_components_validated():
    with pytest.raises(ValueError):
        Name(())
    with pytest.raises(ValueError):
        Name(("a", "b/c"))


def test_prefixes_longest_first():
    assert [str(p) for p in Name.parse("/a/b/c").prefixes()] == ["/a/b/c", "/a/b", "/a"]


def test_prefix_range_checked():
    with pytest.raises(ValueError):
        Name.parse("/a/b").prefix(0)
    assert Name.parse("/a/b").prefix(1) == Name.of("a")


def test_as_name_and_overlaps():
    assert as_name("/x/y") == as_name(["x", "y"]) == Name.of("x", "y")
    assert overlaps(Name.of("a"), Name.of("a", "b"))
    assert not overlaps(Name.of("a", "c"), Name.of("a", "b"))


@given(names)
def test_text_round_trip(name):
    assert Name.parse(str(name)) == name


@given(names)
def test_prefix_reflexive(name):
    assert name.is_prefix_of(name)


@given(names, names, names)
def test_prefix_transitive(a, b, c):
    ab, abc = a.extend(b), a.extend(b).extend(c)
    assert a.is_prefix_of(ab) and ab.is_prefix_of(abc) and a.is_prefix_of(abc)


@given(names, components)
def test_prefix_antisymmetric(name, extra):
    longer = name.append(extra)
    assert name.is_prefix_of(longer)
    assert not longer.is_prefix_of(name)
