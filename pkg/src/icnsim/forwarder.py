"""Virtual ICN forwarder: faces, FIB, PIT, content store and the packet pipelines.

The forwarder is a pure state machine. ``on_interest`` and ``on_data`` never
perform I/O; they return a list of actions that the event engine executes.
"""

from __future__ import annotations

import bisect
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional, Union

from .errors import NotFound, ProtocolError
from .names import Name
from .packets import Data, Interest, verify_provenance

if TYPE_CHECKING:
    from .mobility import RedirectEntry

FaceId = int

DEAD_NONCE_LOG_SIZE = 1024


class DropReason(str, Enum):
    HOP_LIMIT_EXCEEDED = "HopLimitExceeded"
    DUPLICATE_NONCE = "DuplicateNonce"
    NO_ROUTE = "NoRoute"
    PROVENANCE_FAILED = "ProvenanceFailed"
    UNSOLICITED = "Unsolicited"


@dataclass(frozen=True)
class SendInterest:
    face: FaceId
    interest: Interest


@dataclass(frozen=True)
class SendData:
    face: FaceId
    data: Data
    from_cache: bool = False


@dataclass(frozen=True)
class InvokeResolution:
    face: FaceId
    interest: Interest


@dataclass(frozen=True)
class Drop:
    reason: DropReason
    name: Name


# Informational actions: they change nothing downstream but make the
# pipeline decision visible in the trace.
@dataclass(frozen=True)
class Aggregated:
    face: FaceId
    name: Name


@dataclass(frozen=True)
class Redirected:
    name: Name
    new_locator: Name


ForwardAction = Union[SendInterest, SendData, InvokeResolution, Drop, Aggregated, Redirected]


@dataclass
class FibEntry:
    prefix: Name
    nexthops: list[tuple[FaceId, int]]

    def best(self, exclude: FaceId) -> Optional[FaceId]:
        for face, _cost in sorted(self.nexthops, key=lambda fc: (fc[1], fc[0])):
            if face != exclude:
                return face
        return None


@dataclass
class PitEntry:
    name: Name
    in_records: list[tuple[FaceId, int]]
    out_faces: set[FaceId]
    expiry: int


@dataclass
class CsEntry:
    data: Data
    inserted_at: int


class ContentStore:
    """Byte-bounded LRU cache keyed by Data name."""

    def __init__(self, capacity: int):
        self.capacity = capacity
        self.used = 0
        self._entries: OrderedDict[Name, CsEntry] = OrderedDict()
        self._sorted: list[tuple[str, ...]] = []

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, name: Name) -> bool:
        return name in self._entries

    def names(self) -> list[Name]:
        return list(self._entries)

    def _remove(self, name: Name) -> None:
        entry = self._entries.pop(name)
        self.used -= len(entry.data.payload)
        i = bisect.bisect_left(self._sorted, name.components)
        del self._sorted[i]

    def insert(self, data: Data, now: int) -> None:
        size = len(data.payload)
        if data.name in self._entries:
            self._remove(data.name)
        if size > self.capacity:
            return
        while self.used + size > self.capacity:
            self._remove(next(iter(self._entries)))
        self._entries[data.name] = CsEntry(data, now)
        self.used += size
        bisect.insort(self._sorted, data.name.components)

    def _candidates(self, prefix: Name) -> list[Name]:
        out = []
        i = bisect.bisect_left(self._sorted, prefix.components)
        n = len(prefix.components)
        while i < len(self._sorted) and self._sorted[i][:n] == prefix.components:
            out.append(Name._trusted(self._sorted[i]))
            i += 1
        return out

    def lookup(self, prefix: Name, now: int) -> Optional[Data]:
        """Return a fresh Data whose name starts with ``prefix``; refreshes LRU order."""
        names = [prefix] if prefix in self._entries else self._candidates(prefix)
        for name in names:
            entry = self._entries[name]
            if now < entry.inserted_at + entry.data.freshness:
                self._entries.move_to_end(name)
                return entry.data
            self._remove(name)
        return None


class Forwarder:
    def __init__(self, cs_capacity: int = 0, trust_anchors: Iterable[Name] = (),
                 locators: Iterable[Name] = ()):
        self.fib: dict[Name, FibEntry] = {}
        self.pit: dict[Name, PitEntry] = {}
        self.cs = ContentStore(cs_capacity)
        self.faces: set[FaceId] = set()
        self.resolution_rules: set[Name] = set()
        self.trust_anchors: set[Name] = set(trust_anchors)
        self.locators: set[Name] = set(locators)
        self.redirects: dict[Name, RedirectEntry] = {}
        self._dead_nonces: OrderedDict[tuple[Name, int], None] = OrderedDict()
        self._next_face = 1

    # -- faces ---------------------------------------------------------------

    def add_face(self) -> FaceId:
        face = self._next_face
        self._next_face += 1
        self.faces.add(face)
        return face

    def remove_face(self, face: FaceId) -> None:
        if face not in self.faces:
            raise NotFound(f"face {face}")
        self.faces.discard(face)
        for prefix in list(self.fib):
            entry = self.fib[prefix]
            entry.nexthops = [(f, c) for f, c in entry.nexthops if f != face]
            if not entry.nexthops:
                del self.fib[prefix]
        for name in list(self.pit):
            entry = self.pit[name]
            entry.in_records = [(f, n) for f, n in entry.in_records if f != face]
            entry.out_faces.discard(face)
            if not entry.in_records:
                self._retire(entry)

    # -- tables --------------------------------------------------------------

    def install_fib(self, prefix: Name, nexthops: Iterable[tuple[FaceId, int]]) -> None:
        hops: list[tuple[FaceId, int]] = []
        for face, cost in nexthops:
            if face not in self.faces:
                raise NotFound(f"nexthop face {face}")
            if any(f == face for f, _ in hops):
                raise ValueError(f"duplicate nexthop face {face} for {prefix}")
            hops.append((face, cost))
        if not hops:
            raise ValueError("a FIB entry needs at least one nexthop")
        self.fib[prefix] = FibEntry(prefix, hops)

    def remove_fib(self, prefix: Name) -> None:
        if prefix not in self.fib:
            raise NotFound(f"FIB prefix {prefix}")
        del self.fib[prefix]

    def set_resolution_rule(self, prefix: Name) -> None:
        self.resolution_rules.add(prefix)

    def unset_resolution_rule(self, prefix: Name) -> None:
        if prefix not in self.resolution_rules:
            raise NotFound(f"resolution rule {prefix}")
        self.resolution_rules.discard(prefix)

    def fib_lookup(self, name: Name) -> Optional[FibEntry]:
        fib = self.fib
        for prefix in name.prefixes():
            entry = fib.get(prefix)
            if entry is not None:
                return entry
        return None

    def needs_resolution(self, name: Name) -> bool:
        return any(rule.is_prefix_of(name) for rule in self.resolution_rules)

    def _redirect_for(self, name: Name, now: int) -> Optional[RedirectEntry]:
        if not self.redirects:
            return None
        for prefix in name.prefixes():
            entry = self.redirects.get(prefix)
            if entry is not None:
                if entry.expiry <= now:
                    del self.redirects[prefix]
                    continue
                return entry
        return None

    def _is_local_locator(self, hint: Name) -> bool:
        return any(loc.is_prefix_of(hint) for loc in self.locators)

    # -- PIT bookkeeping ------------------------------------------------------

    def _remember_nonce(self, name: Name, nonce: int) -> None:
        key = (name, nonce)
        self._dead_nonces[key] = None
        self._dead_nonces.move_to_end(key)
        while len(self._dead_nonces) > DEAD_NONCE_LOG_SIZE:
            self._dead_nonces.popitem(last=False)

    def _retire(self, entry: PitEntry) -> None:
        del self.pit[entry.name]
        for _face, nonce in entry.in_records:
            self._remember_nonce(entry.name, nonce)

    def _seen_nonce(self, name: Name, nonce: int) -> bool:
        if (name, nonce) in self._dead_nonces:
            return True
        entry = self.pit.get(name)
        return entry is not None and any(n == nonce for _, n in entry.in_records)

    def expire_pit(self, now: int) -> list[Name]:
        expired = [e for e in self.pit.values() if e.expiry <= now]
        for entry in expired:
            self._retire(entry)
        return [e.name for e in expired]

    # -- pipelines -----------------------------------------------------------

    def _check_face(self, face: FaceId) -> None:
        if face not in self.faces:
            raise ProtocolError(f"packet arrived on unknown face {face}")

    def on_interest(self, in_face: FaceId, interest: Interest, now: int) -> list[ForwardAction]:
        self._check_face(in_face)
        name = interest.name
        hop_limit = interest.hop_limit - 1
        if hop_limit <= 0:
            return [Drop(DropReason.HOP_LIMIT_EXCEEDED, name)]
        if self._seen_nonce(name, interest.nonce):
            return [Drop(DropReason.DUPLICATE_NONCE, name)]

        cached = self.cs.lookup(name, now)
        if cached is not None:
            return [SendData(in_face, cached, from_cache=True)]

        pending = self.pit.get(name)
        if pending is not None:
            pending.in_records.append((in_face, interest.nonce))
            pending.expiry = max(pending.expiry, now + interest.lifetime)
            return [Aggregated(in_face, name)]

        actions: list[ForwardAction] = []
        hint = interest.forwarding_hint
        redirect = self._redirect_for(name, now)
        if redirect is not None and hint != redirect.new_locator:
            hint = redirect.new_locator
            actions.append(Redirected(name, hint))

        if hint is None and self.needs_resolution(name):
            return [InvokeResolution(in_face, interest)]

        if hint is not None and self._is_local_locator(hint):
            # The hint has led the Interest into its locator's region.
            hint = None
        entry = self.fib_lookup(hint if hint is not None else name)
        out_face = entry.best(exclude=in_face) if entry is not None else None
        if out_face is None:
            return actions + [Drop(DropReason.NO_ROUTE, name)]

        self.pit[name] = PitEntry(name, [(in_face, interest.nonce)], {out_face}, now + interest.lifetime)
        outgoing = replace(interest, hop_limit=hop_limit, forwarding_hint=hint)
        actions.append(SendInterest(out_face, outgoing))
        return actions

    def on_data(self, in_face: FaceId, data: Data, now: int) -> list[ForwardAction]:
        self._check_face(in_face)
        if not verify_provenance(data, self.trust_anchors):
            return [Drop(DropReason.PROVENANCE_FAILED, data.name)]
        matched = [self.pit[p] for p in reversed(list(data.name.prefixes())) if p in self.pit]
        if not matched:
            return [Drop(DropReason.UNSOLICITED, data.name)]
        self.cs.insert(data, now)
        actions: list[ForwardAction] = []
        sent: set[FaceId] = set()
        for entry in matched:
            for face, _nonce in entry.in_records:
                if face not in sent:
                    sent.add(face)
                    actions.append(SendData(face, data))
            self._retire(entry)
        return actions
