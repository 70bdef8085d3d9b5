"""Physical substrate: nodes, links with FIFO queues, UEs and the event engine.

Time is integer microseconds everywhere.
"""

from __future__ import annotations

import heapq
import itertools
from collections import Counter, deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Optional

import networkx as nx

from .errors import InvalidTransition, NotFound, SimulationError
from .names import Name

NodeId = str
LinkId = str
UeId = str

POA_ROLES = ("icn_bs", "icn_sr")

DEFAULT_RADIO_LATENCY_US = 1_000
DEFAULT_RADIO_BANDWIDTH_BPS = 100_000_000
DEFAULT_QUEUE_CAPACITY = 64


class Role(str, Enum):
    ICN_BS = "icn_bs"
    ICN_SR = "icn_sr"
    CORE_ROUTER = "core_router"
    CLOUD = "cloud"


@dataclass
class PhysNode:
    id: NodeId
    role: Role
    cpu_capacity: int
    storage_capacity: int
    locator_prefix: Optional[Name] = None
    radio_latency: int = DEFAULT_RADIO_LATENCY_US
    radio_bandwidth: int = DEFAULT_RADIO_BANDWIDTH_BPS
    radio_queue: int = DEFAULT_QUEUE_CAPACITY

    def __post_init__(self) -> None:
        self.role = Role(self.role)
        if self.locator_prefix is None and self.is_poa:
            self.locator_prefix = Name.of("poa", self.id)

    @property
    def is_poa(self) -> bool:
        return self.role.value in POA_ROLES


@dataclass
class PhysLink:
    id: LinkId
    endpoints: tuple[NodeId, NodeId]
    latency: int
    bandwidth: int
    queue_capacity: int = DEFAULT_QUEUE_CAPACITY

    def __post_init__(self) -> None:
        if self.latency <= 0 or self.bandwidth <= 0:
            raise ValueError(f"link {self.id}: latency and bandwidth must be positive")
        if self.queue_capacity <= 0:
            raise ValueError(f"link {self.id}: queue capacity must be positive")


@dataclass
class Ue:
    id: UeId
    attached_poa: Optional[NodeId] = None
    app_names: set[Name] = field(default_factory=set)


def serialization_delay(size_bytes: int, bandwidth_bps: int) -> int:
    """Transmission time in whole microseconds, rounded up."""
    return -(-size_bytes * 8 * 1_000_000 // bandwidth_bps)


class LinkQueue:
    """One direction of a link: FIFO serialization with a tail-drop queue."""

    def __init__(self, link: PhysLink, src: NodeId):
        self.link = link
        self.src = src
        self.busy_until = 0
        self._in_system: deque[int] = deque()
        self.dropped = 0
        self.sent = 0

    def occupancy(self, now: int) -> int:
        while self._in_system and self._in_system[0] <= now:
            self._in_system.popleft()
        return len(self._in_system)

    def deliver(self, size_bytes: int, now: int) -> Optional[int]:
        """Admit a packet; returns its arrival time at the far end or None on tail drop."""
        if self.occupancy(now) >= self.link.queue_capacity:
            self.dropped += 1
            return None
        start = max(now, self.busy_until)
        self.busy_until = start + serialization_delay(size_bytes, self.link.bandwidth)
        self._in_system.append(self.busy_until)
        self.sent += 1
        return self.busy_until + self.link.latency


class Topology:
    def __init__(self, nodes: list[PhysNode], links: list[PhysLink]):
        self.nodes: dict[NodeId, PhysNode] = {}
        for node in nodes:
            if node.id in self.nodes:
                raise ValueError(f"duplicate node id {node.id}")
            self.nodes[node.id] = node
        self.links: dict[LinkId, PhysLink] = {}
        self.graph = nx.Graph()
        self.graph.add_nodes_from(n.id for n in nodes)
        for link in links:
            if link.id in self.links:
                raise ValueError(f"duplicate link id {link.id}")
            a, b = link.endpoints
            for end in (a, b):
                if end not in self.nodes:
                    raise ValueError(f"link {link.id} references unknown node {end}")
            self.links[link.id] = link
            self.graph.add_edge(a, b, latency=link.latency, link=link.id)
        self._paths: dict[NodeId, tuple[dict[NodeId, int], dict[NodeId, list[NodeId]]]] = {}

    def poas(self) -> list[PhysNode]:
        return [n for n in self.nodes.values() if n.is_poa]

    def poa_by_locator(self, locator: Name) -> Optional[PhysNode]:
        for node in self.nodes.values():
            if node.locator_prefix == locator:
                return node
        return None

    def _sssp(self, src: NodeId):
        if src not in self._paths:
            self._paths[src] = nx.single_source_dijkstra(self.graph, src, weight="latency")
        return self._paths[src]

    def path_latency(self, src: NodeId, dst: NodeId) -> Optional[int]:
        dist, _ = self._sssp(src)
        return dist.get(dst)

    def node_path(self, src: NodeId, dst: NodeId) -> list[NodeId]:
        _, paths = self._sssp(src)
        if dst not in paths:
            raise NotFound(f"no path {src} -> {dst}")
        return paths[dst]

    def link_path(self, src: NodeId, dst: NodeId) -> list[tuple[PhysLink, NodeId]]:
        """Links along the lowest-latency path, each with the node it leaves from."""
        nodes = self.node_path(src, dst)
        return [(self.links[self.graph.edges[u, v]["link"]], u) for u, v in zip(nodes, nodes[1:])]

    def path_bandwidth(self, src: NodeId, dst: NodeId) -> Optional[int]:
        try:
            hops = self.link_path(src, dst)
        except NotFound:
            return None
        return min((link.bandwidth for link, _ in hops), default=None)

    def ue_latency(self, poa: NodeId, node: NodeId) -> Optional[int]:
        """Latency from a UE attached at ``poa`` to ``node``: radio hop plus wired path."""
        wired = self.path_latency(poa, node)
        if wired is None:
            return None
        return self.nodes[poa].radio_latency + wired

    def ue_bandwidth(self, poa: NodeId, node: NodeId) -> Optional[int]:
        radio = self.nodes[poa].radio_bandwidth
        wired = self.path_bandwidth(poa, node)
        if poa != node and wired is None:
            return None
        return radio if wired is None else min(radio, wired)


# -- event engine ----------------------------------------------------------------


class EventKind(str, Enum):
    PACKET_ARRIVAL = "PacketArrival"
    TIMER_FIRE = "TimerFire"
    UE_ATTACH = "UeAttach"
    UE_DETACH = "UeDetach"
    SCENARIO_ACTION = "ScenarioAction"


@dataclass(order=True)
class SimEvent:
    time: int
    seq: int
    kind: EventKind = field(compare=False)
    callback: Callable[..., Any] = field(compare=False, repr=False)
    args: tuple = field(compare=False, default=(), repr=False)
    cancelled: bool = field(compare=False, default=False)

    def cancel(self) -> None:
        self.cancelled = True


@dataclass
class MetricsSnapshot:
    now: int = 0
    events_processed: int = 0
    counters: dict[str, int] = field(default_factory=dict)


class EventEngine:
    def __init__(self) -> None:
        self.now = 0
        self._queue: list[SimEvent] = []
        self._seq = itertools.count()
        self.processed = 0
        self.counters: Counter[str] = Counter()
        self.on_event: Optional[Callable[[SimEvent], None]] = None

    def __len__(self) -> int:
        return len(self._queue)

    def schedule(self, time: int, kind: EventKind, callback: Callable[..., Any], *args: Any) -> SimEvent:
        if time < self.now:
            raise SimulationError(f"event at t={time} scheduled in the past (now={self.now})")
        event = SimEvent(int(time), next(self._seq), kind, callback, args)
        heapq.heappush(self._queue, event)
        return event

    def schedule_in(self, delay: int, kind: EventKind, callback: Callable[..., Any], *args: Any) -> SimEvent:
        return self.schedule(self.now + delay, kind, callback, *args)

    def step(self) -> SimEvent:
        event = heapq.heappop(self._queue)
        if event.time < self.now:
            raise SimulationError(f"time went backwards: {event.time} < {self.now}")
        self.now = event.time
        if not event.cancelled:
            self.processed += 1
            self.counters[event.kind.value] += 1
            if self.on_event is not None:
                self.on_event(event)
            event.callback(*event.args)
        return event

    def run_until(self, t_end: int) -> MetricsSnapshot:
        while self._queue and self._queue[0].time <= t_end:
            self.step()
        self.now = max(self.now, t_end)
        return MetricsSnapshot(self.now, self.processed, dict(sorted(self.counters.items())))


# -- UE attachment state machine ---------------------------------------------------


@dataclass(frozen=True)
class AttachNotification:
    ue: UeId
    poa: NodeId
    time: int


@dataclass(frozen=True)
class DetachNotification:
    ue: UeId
    poa: NodeId
    time: int


def ue_attach(ue: Ue, poa: NodeId, now: int) -> AttachNotification:
    if ue.attached_poa is not None:
        raise InvalidTransition(f"UE {ue.id} already attached at {ue.attached_poa}")
    ue.attached_poa = poa
    return AttachNotification(ue.id, poa, now)


def ue_detach(ue: Ue, now: int) -> DetachNotification:
    if ue.attached_poa is None:
        raise InvalidTransition(f"UE {ue.id} is not attached")
    poa, ue.attached_poa = ue.attached_poa, None
    return DetachNotification(ue.id, poa, now)
