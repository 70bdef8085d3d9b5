"""Hierarchical names: the universal key for content, services, devices and locators."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator


@dataclass(frozen=True, order=True)
class Name:
    components: tuple[str, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.components, tuple):
            object.__setattr__(self, "components", tuple(self.components))
        if not self.components:
            raise ValueError("a name needs at least one component")
        for comp in self.components:
            if not isinstance(comp, str) or not comp:
                raise ValueError(f"invalid name component {comp!r}")
            if "/" in comp:
                raise ValueError(f"name component may not contain '/': {comp!r}")

    @classmethod
    def parse(cls, text: str) -> Name:
        if not text.startswith("/"):
            raise ValueError(f"name must start with '/': {text!r}")
        return cls(tuple(text[1:].split("/")))

    @classmethod
    def of(cls, *components: str) -> Name:
        return cls(tuple(components))

    def __str__(self) -> str:
        return "/" + "/".join(self.components)

    def __repr__(self) -> str:
        return f"Name({str(self)!r})"

    def __len__(self) -> int:
        return len(self.components)

    def is_prefix_of(self, other: Name) -> bool:
        n = len(self.components)
        return n <= len(other.components) and other.components[:n] == self.components

    @classmethod
    def _trusted(cls, components: tuple[str, ...]) -> Name:
        # Skips validation; only for slices of an already valid name.
        obj = object.__new__(cls)
        object.__setattr__(obj, "components", components)
        return obj

    def append(self, *components: str) -> Name:
        return Name(self.components + tuple(components))

    def extend(self, other: Name) -> Name:
        return Name(self.components + other.components)

    def prefix(self, n: int) -> Name:
        if not 1 <= n <= len(self.components):
            raise ValueError(f"prefix length {n} out of range for {self}")
        return Name._trusted(self.components[:n])

    def prefixes(self) -> Iterator[Name]:
        """Yield every prefix of this name, longest first."""
        for n in range(len(self.components), 0, -1):
            yield Name._trusted(self.components[:n])


def name_is_prefix(prefix: Name, name: Name) -> bool:
    return prefix.is_prefix_of(name)


def overlaps(a: Name, b: Name) -> bool:
    return a.is_prefix_of(b) or b.is_prefix_of(a)


def as_name(value: Name | str | Iterable[str]) -> Name:
    if isinstance(value, Name):
        return value
    if isinstance(value, str):
        return Name.parse(value)
    return Name(tuple(value))
