"""Interest and Data packets plus the modeled provenance tag."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

from .names import Name

DEFAULT_LIFETIME_US = 4_000_000
DEFAULT_HOP_LIMIT = 32

MAX_U32 = 0xFFFF_FFFF
MAX_U64 = 0xFFFF_FFFF_FFFF_FFFF


@dataclass(frozen=True)
class Interest:
    name: Name
    nonce: int
    lifetime: int = DEFAULT_LIFETIME_US
    hop_limit: int = DEFAULT_HOP_LIMIT
    forwarding_hint: Optional[Name] = None
    context: tuple[tuple[str, str], ...] = ()

    def __post_init__(self) -> None:
        if not 0 <= self.nonce <= MAX_U32:
            raise ValueError(f"nonce out of range: {self.nonce}")
        if not 0 < self.lifetime <= MAX_U64:
            raise ValueError(f"lifetime must be positive: {self.lifetime}")
        if not 0 < self.hop_limit <= 0xFF:
            raise ValueError(f"hop_limit must be in 1..255: {self.hop_limit}")
        if not isinstance(self.context, tuple):
            object.__setattr__(self, "context", tuple(tuple(kv) for kv in self.context))

    def with_hint(self, hint: Optional[Name]) -> Interest:
        return replace(self, forwarding_hint=hint)

    def context_value(self, key: str) -> Optional[str]:
        for k, v in self.context:
            if k == key:
                return v
        return None


@dataclass(frozen=True)
class Data:
    name: Name
    payload: bytes = b""
    freshness: int = 0
    key_id: Name = field(default_factory=lambda: Name.of("anonymous"))
    signature_tag: bytes = b""

    def __post_init__(self) -> None:
        if not 0 <= self.freshness <= MAX_U64:
            raise ValueError(f"freshness out of range: {self.freshness}")

    def satisfies(self, interest: Interest) -> bool:
        return interest.name.is_prefix_of(self.name)


Packet = Union[Interest, Data]


def _canonical_name(name: Name) -> bytes:
    out = bytearray()
    for comp in name.components:
        raw = comp.encode("utf-8")
        out += struct.pack(">I", len(raw)) + raw
    return struct.pack(">I", len(name.components)) + bytes(out)


def signature_tag_of(name: Name, payload: bytes, key_id: Name) -> bytes:
    h = hashlib.sha256()
    h.update(_canonical_name(name))
    h.update(struct.pack(">Q", len(payload)))
    h.update(payload)
    h.update(_canonical_name(key_id))
    return h.digest()


def make_data(name: Name, payload: bytes, key_id: Name, freshness: int = 0) -> Data:
    """Build a Data carrying a valid signature tag for ``key_id``."""
    return Data(name, payload, freshness, key_id, signature_tag_of(name, payload, key_id))


def is_trusted(key_id: Name, trust_anchors: Iterable[Name]) -> bool:
    # An anchor vouches for its own name and every key underneath it.
    return any(anchor.is_prefix_of(key_id) for anchor in trust_anchors)


def verify_provenance(data: Data, trust_anchors: Iterable[Name]) -> bool:
    if not is_trusted(data.key_id, trust_anchors):
        return False
    return data.signature_tag == signature_tag_of(data.name, data.payload, data.key_id)
