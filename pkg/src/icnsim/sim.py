"""The simulation: wires substrate, forwarders, slices and UEs onto one event timeline."""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from typing import Callable, Optional

from .codec import encoded_size
from .conference import ConfServiceFunction, DiscoveryFunction, DiscoveryResponse, ParticipantApp
from .endpoints import AppEndpoint, Channel, Endpoint, ForwarderEndpoint
from .errors import NotFound, PreconditionError
from .forwarder import Forwarder
from .mobility import DEFAULT_GRACE_US, MobilityRuntime
from .names import Name
from .orchestration import (BASE_NS, BASE_SLICE_ID, LOCATOR_NS, TRUST_NS, Orchestrator, SliceStatus,
                            VnfInstance, VnfKind)
from .packets import DEFAULT_HOP_LIMIT, DEFAULT_LIFETIME_US
from .substrate import (EventEngine, EventKind, LinkQueue, MetricsSnapshot, NodeId, PhysLink, Topology, Ue,
                        ue_attach, ue_detach)
from .trace import Trace

log = logging.getLogger(__name__)

DEFAULT_CHUNK_SIZE = 1200
DEFAULT_DATA_FRESHNESS_US = 10_000_000


@dataclass(frozen=True)
class SimConfig:
    interest_lifetime: int = DEFAULT_LIFETIME_US
    hop_limit: int = DEFAULT_HOP_LIMIT
    grace: int = DEFAULT_GRACE_US
    chunk_size: int = DEFAULT_CHUNK_SIZE
    data_freshness: int = DEFAULT_DATA_FRESHNESS_US


@dataclass
class UeRuntime:
    ue: Ue
    fwd: ForwarderEndpoint
    app: ParticipantApp
    app_channel: Channel
    uplink: Optional[Channel] = None
    radio: Optional[PhysLink] = None
    # prefixes the UE forwarder sends towards its PoA
    uplink_prefixes: set[Name] = field(default_factory=set)


class Simulation:
    def __init__(self, topology: Topology, seed: int = 0, config: Optional[SimConfig] = None):
        self.topology = topology
        self.seed = seed
        self.config = config or SimConfig()
        self.engine = EventEngine()
        self.trace = Trace()
        self.rng = random.Random(seed)
        self.endpoints: dict[str, Endpoint] = {}
        self.channels: dict[int, Channel] = {}
        self.ues: dict[str, UeRuntime] = {}
        self._faces: dict[tuple[str, int], Channel] = {}
        self._queues: dict[tuple[str, NodeId], LinkQueue] = {}
        self._base_fwd: dict[NodeId, str] = {}
        self._next_channel = 1
        self.mobility = MobilityRuntime(self, grace=self.config.grace)
        self.orchestrator = Orchestrator(self)

    @property
    def now(self) -> int:
        return self.engine.now

    def next_nonce(self) -> int:
        return self.rng.getrandbits(32)

    # -- physical transport --------------------------------------------------------

    def queue(self, link: PhysLink, src: NodeId) -> LinkQueue:
        key = (link.id, src)
        q = self._queues.get(key)
        if q is None:
            q = self._queues[key] = LinkQueue(link, src)
        return q

    def path_queues(self, src: Optional[NodeId], dst: Optional[NodeId]) -> list[LinkQueue]:
        if src is None or dst is None or src == dst:
            return []
        return [self.queue(link, u) for link, u in self.topology.link_path(src, dst)]

    def transmit(self, path: list[LinkQueue], packet, on_arrive: Callable[[], None]) -> None:
        """Carry ``packet`` hop by hop over ``path``, then call ``on_arrive``."""
        self.engine.schedule(self.now, EventKind.PACKET_ARRIVAL, self._hop, path, 0, packet,
                             encoded_size(packet), on_arrive)

    def _hop(self, path: list[LinkQueue], i: int, packet, size: int, on_arrive: Callable[[], None]) -> None:
        if i == len(path):
            on_arrive()
            return
        q = path[i]
        arrival = q.deliver(size, self.now)
        if arrival is None:
            self.trace.emit(self.now, q.src, "link_drop", link=q.link.id, name=str(packet.name))
            return
        self.engine.schedule(arrival, EventKind.PACKET_ARRIVAL, self._hop, path, i + 1, packet, size, on_arrive)

    def transmit_between_nodes(self, src: NodeId, dst: NodeId, packet, then: Callable[[], None]) -> None:
        self.transmit(self.path_queues(src, dst), packet, then)

    # -- channels ------------------------------------------------------------------

    def connect(self, a: Endpoint, b: Endpoint, path_ab: Optional[list[LinkQueue]] = None,
                path_ba: Optional[list[LinkQueue]] = None) -> Channel:
        if path_ab is None:
            path_ab = self.path_queues(a.node, b.node)
        if path_ba is None:
            path_ba = self.path_queues(b.node, a.node)
        ch = Channel(self._next_channel, a, a.add_face(), b, b.add_face(), path_ab, path_ba)
        self._next_channel += 1
        self.channels[ch.id] = ch
        self._faces[(a.id, ch.face_a)] = ch
        self._faces[(b.id, ch.face_b)] = ch
        return ch

    def disconnect(self, ch_id: int) -> None:
        ch = self.channels.pop(ch_id, None)
        if ch is None:
            return
        ch.open = False
        for ep, face in ((ch.a, ch.face_a), (ch.b, ch.face_b)):
            self._faces.pop((ep.id, face), None)
            if isinstance(ep, ForwarderEndpoint) and not ep.on_ue:
                self._log_pruned_routes(ep, face)
            ep.drop_face(face)

    def _log_pruned_routes(self, ep: ForwarderEndpoint, face: int) -> None:
        """Routes that vanish with a face still count as removed rules."""
        for prefix, entry in sorted(ep.fwd.fib.items()):
            if all(f == face for f, _ in entry.nexthops):
                self.orchestrator.controller._log(self.slice_for_prefix(prefix), ep.id, "fib_remove", prefix)

    def face_between(self, a: Endpoint, b: Endpoint) -> Optional[int]:
        for ch in self.channels.values():
            if ch.a is a and ch.b is b:
                return ch.face_a
            if ch.b is a and ch.a is b:
                return ch.face_b
        return None

    def send(self, ep: Endpoint, face: int, packet) -> None:
        ch = self._faces.get((ep.id, face))
        if ch is None or not ch.open:
            self.trace.emit(self.now, ep.id, "channel_drop", face=face, name=str(packet.name))
            return
        dst, dst_face, path = ch.peer(ep)
        self.transmit(path, packet, lambda: self._arrive(ch, dst, dst_face, packet))

    def _arrive(self, ch: Channel, dst: Endpoint, face: int, packet) -> None:
        if not ch.open or not dst.alive:
            self.trace.emit(self.now, dst.id, "channel_drop", face=face, name=str(packet.name))
            return
        dst.receive(face, packet)

    # -- VNFs ----------------------------------------------------------------------

    def spawn_vnf(self, vnf: VnfInstance) -> None:
        ep: Optional[Endpoint] = None
        if vnf.kind is VnfKind.ICN_FORWARDER:
            if vnf.slice == BASE_SLICE_ID:
                loc = self.topology.nodes[vnf.node].locator_prefix
                fwd = Forwarder(vnf.alloc.cs_capacity, trust_anchors=[BASE_NS, TRUST_NS],
                                locators=[loc] if loc is not None else [])
                self._base_fwd[vnf.node] = vnf.id
            else:
                fwd = Forwarder(vnf.alloc.cs_capacity)
            ep = ForwarderEndpoint(self, vnf.id, vnf.node, fwd, slice_id=vnf.slice)
        elif vnf.kind is VnfKind.DISCOVERY_FN:
            ep = DiscoveryFunction(self, vnf.id, vnf.node)
        elif vnf.kind is VnfKind.CONF_SERVICE_FN:
            ep = ConfServiceFunction(self, vnf.id, vnf.node, vnf.slice)
        # NRS and MSA state lives in the mobility runtime; they exchange no ICN packets.
        if ep is not None:
            self.endpoints[ep.id] = ep

    def despawn_vnf(self, vnf: VnfInstance) -> None:
        ep = self.endpoints.pop(vnf.id, None)
        if ep is None:
            return
        for ch in [c for c in self.channels.values() if c.a is ep or c.b is ep]:
            self.disconnect(ch.id)
        ep.alive = False
        if self._base_fwd.get(vnf.node) == vnf.id:
            del self._base_fwd[vnf.node]

    def base_forwarder(self, poa: NodeId) -> Optional[ForwarderEndpoint]:
        ep_id = self._base_fwd.get(poa)
        return self.endpoints.get(ep_id) if ep_id is not None else None  # type: ignore[return-value]

    def slice_for_prefix(self, prefix: Name) -> str:
        if LOCATOR_NS.is_prefix_of(prefix) or TRUST_NS.is_prefix_of(prefix) or BASE_NS.is_prefix_of(prefix):
            return BASE_SLICE_ID
        for sl in self.orchestrator.slices.values():
            if sl.status is not SliceStatus.TORN_DOWN and sl.name_space.is_prefix_of(prefix):
                return sl.id
        return BASE_SLICE_ID

    # -- UEs -----------------------------------------------------------------------

    def add_ue(self, ue_id: str) -> UeRuntime:
        if ue_id in self.ues:
            raise ValueError(f"duplicate UE {ue_id}")
        fwd = ForwarderEndpoint(self, f"uefwd:{ue_id}", None, Forwarder(0, trust_anchors=[BASE_NS]), on_ue=True)
        app = ParticipantApp(self, ue_id)
        self.endpoints[fwd.id] = fwd
        self.endpoints[app.id] = app
        ch = self.connect(app, fwd, [], [])
        rt = UeRuntime(Ue(ue_id), fwd, app, ch, uplink_prefixes={BASE_NS, TRUST_NS})
        self.ues[ue_id] = rt
        return rt

    def _ue(self, ue_id: str) -> UeRuntime:
        rt = self.ues.get(ue_id)
        if rt is None:
            raise NotFound(f"UE {ue_id}")
        return rt

    def attach(self, ue_id: str, poa: NodeId) -> None:
        rt = self._ue(ue_id)
        node = self.topology.nodes.get(poa)
        if node is None or not node.is_poa:
            raise PreconditionError(f"{poa} is not a point of attachment")
        base = self.base_forwarder(poa)
        if base is None:
            raise PreconditionError(f"no base forwarder at {poa}")
        note = ue_attach(rt.ue, poa, self.now)
        radio = PhysLink(f"radio:{ue_id}@{poa}", (poa, poa), node.radio_latency, node.radio_bandwidth,
                         node.radio_queue)
        rt.radio = radio
        up, down = LinkQueue(radio, f"ue:{ue_id}"), LinkQueue(radio, poa)
        rt.uplink = self.connect(rt.fwd, base, [up], [down])
        ue_face = rt.uplink.face_of(rt.fwd)
        for prefix in sorted(rt.uplink_prefixes):
            rt.fwd.fwd.install_fib(prefix, [(ue_face, 0)])
        base_face = rt.uplink.face_of(base)
        ctl = self.orchestrator.controller
        for name in sorted(rt.ue.app_names):
            ctl.install_fib(None, self.slice_for_prefix(name), base, name, base_face)
        self.trace.emit(self.now, ue_id, "ue", event="attach", poa=note.poa)
        self.mobility.on_attached(ue_id, poa)

    def detach(self, ue_id: str) -> None:
        rt = self._ue(ue_id)
        note = ue_detach(rt.ue, self.now)
        if rt.uplink is not None:
            self.disconnect(rt.uplink.id)
            rt.uplink = None
        self.trace.emit(self.now, ue_id, "ue", event="detach", poa=note.poa)

    def handover(self, ue_id: str, to_poa: NodeId, gap: int) -> None:
        rt = self._ue(ue_id)
        src = rt.ue.attached_poa
        if src is None:
            raise PreconditionError(f"UE {ue_id} is not attached")
        if gap < 0:
            raise ValueError("handover gap must be nonnegative")
        self.trace.emit(self.now, ue_id, "handover", src=src, dst=to_poa, gap=gap)
        self.detach(ue_id)
        self.engine.schedule_in(gap, EventKind.UE_ATTACH, self.attach, ue_id, to_poa)

    def register_app_name(self, ue_id: str, prefix: Name) -> None:
        rt = self._ue(ue_id)
        if prefix in rt.ue.app_names:
            return
        rt.ue.app_names.add(prefix)
        rt.fwd.fwd.install_fib(prefix, [(rt.app_channel.face_of(rt.fwd), 0)])
        if rt.uplink is not None:
            base = self.base_forwarder(rt.ue.attached_poa)
            self.orchestrator.controller.install_fib(None, self.slice_for_prefix(prefix), base, prefix,
                                                     rt.uplink.face_of(base))

    def install_discovery(self, ue_id: str, resp: DiscoveryResponse) -> None:
        rt = self._ue(ue_id)
        rt.fwd.fwd.trust_anchors.update(resp.trust_anchors)
        rt.uplink_prefixes.add(resp.name_space)
        if rt.uplink is not None:
            rt.fwd.fwd.install_fib(resp.name_space, [(rt.uplink.face_of(rt.fwd), 0)])

    def purge_namespace(self, slice_id: str, ns: Name) -> None:
        """Remove every rule and registration under ``ns`` left on any forwarder."""
        ctl = self.orchestrator.controller
        for ep in list(self.endpoints.values()):
            if not isinstance(ep, ForwarderEndpoint):
                continue
            for prefix in sorted(p for p in ep.fwd.fib if ns.is_prefix_of(p)):
                if not ep.on_ue:
                    ctl.remove_fib(slice_id, ep, prefix)
                elif prefix != ns:
                    # The UE keeps its uplink route; only local producer routes go.
                    ep.fwd.remove_fib(prefix)
            for prefix in sorted(p for p in ep.fwd.resolution_rules if ns.is_prefix_of(p)):
                ep.fwd.unset_resolution_rule(prefix)
                if not ep.on_ue:
                    ctl._log(slice_id, ep.id, "resolution_unset", prefix)
            for prefix in [p for p in ep.fwd.redirects if ns.is_prefix_of(p)]:
                del ep.fwd.redirects[prefix]
        for rt in self.ues.values():
            rt.ue.app_names = {n for n in rt.ue.app_names if not ns.is_prefix_of(n)}
            for flow in rt.app.flows.values():
                if ns.is_prefix_of(flow.target):
                    flow.stop()

    # -- running -------------------------------------------------------------------

    def run_until(self, t_end: int) -> MetricsSnapshot:
        return self.engine.run_until(t_end)

    def finalize(self) -> None:
        """Close every fetch flow, recording what is still outstanding."""
        for ue_id in sorted(self.ues):
            app = self.ues[ue_id].app
            for fid in sorted(app.flows):
                flow = app.flows[fid]
                self.trace.emit(self.now, app.id, "flow_end", flow=fid, in_flight=flow.in_flight())
                flow.stop()


__all__ = ["SimConfig", "Simulation", "UeRuntime", "AppEndpoint", "ForwarderEndpoint", "Channel"]
