"""Slice orchestration stack: intent intake, resource translation, VNF placement,
slice lifecycle and the domain controller that pushes rules into forwarders.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Optional

from .errors import (AlreadyActive, InsufficientResources, InvariantViolation, NamespaceConflict,
                     NotFound, PreconditionError, Rejected, Unsupported)
from .names import Name, overlaps
from .substrate import NodeId, Topology

if TYPE_CHECKING:
    from .endpoints import ForwarderEndpoint
    from .sim import Simulation

log = logging.getLogger(__name__)

BASE_NS = Name.of("discovery")
TRUST_NS = Name.of("trust")
MOBILITY_NS = Name.of("mobility")
LOCATOR_NS = Name.of("poa")
RESERVED = (BASE_NS, TRUST_NS, MOBILITY_NS, LOCATOR_NS)

BASE_SLICE_ID = "base"
MOBILITY_SLICE_ID = "mobility"

DEFAULT_GATEWAY_CACHE = 10_000_000


class ServiceType(str, Enum):
    BASE = "base"
    MOBILITY = "mobility"
    CONFERENCE = "conference"


class VnfKind(str, Enum):
    ICN_FORWARDER = "icn_forwarder"
    MSA = "msa"
    NRS = "nrs"
    CONF_SERVICE_FN = "conf_service_fn"
    DISCOVERY_FN = "discovery_fn"


class NetworkService(str, Enum):
    REACHABILITY = "reachability"
    SECURITY = "security"
    MOBILITY = "mobility"
    MULTICAST = "multicast"
    STORAGE = "storage"


class SliceStatus(str, Enum):
    PROVISIONING = "provisioning"
    ACTIVE = "active"
    TORN_DOWN = "torn_down"


@dataclass(frozen=True)
class Sla:
    latency_bound: int = 10_000
    bandwidth_floor: int = 1_000_000

    def __post_init__(self) -> None:
        if self.latency_bound <= 0 or self.bandwidth_floor <= 0:
            raise ValueError("SLA bounds must be positive")


@dataclass(frozen=True)
class Intent:
    service_type: ServiceType
    participants: tuple[tuple[NodeId, int], ...] = ()
    sla: Sla = Sla()
    network_services: frozenset[NetworkService] = frozenset()
    demand_pattern: float = 0.0
    slice_id: Optional[str] = None
    name_space: Optional[Name] = None
    cache_bytes: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "service_type", ServiceType(self.service_type))
        object.__setattr__(self, "participants", tuple((r, int(c)) for r, c in self.participants))
        object.__setattr__(self, "network_services", frozenset(NetworkService(s) for s in self.network_services))
        if self.service_type is ServiceType.CONFERENCE and not self.participants:
            raise ValueError("a conference intent needs at least one participant group")
        if self.cache_bytes is None:
            default = DEFAULT_GATEWAY_CACHE if self.service_type is ServiceType.CONFERENCE else 0
            object.__setattr__(self, "cache_bytes", default)
        if self.cache_bytes < 0:
            raise ValueError("cache_bytes must be nonnegative")


@dataclass(frozen=True)
class Alloc:
    cpu: int
    storage: int
    cs_capacity: int = 0

    @property
    def storage_total(self) -> int:
        return self.storage + self.cs_capacity


@dataclass(frozen=True)
class VnfDemand:
    kind: VnfKind
    alloc: Alloc
    region: Optional[NodeId] = None
    max_latency: Optional[int] = None
    min_bandwidth: Optional[int] = None
    pin: Optional[NodeId] = None

    def describe_constraint(self) -> str:
        if self.pin is not None:
            return f"hosted on {self.pin}"
        if self.max_latency is not None:
            return f"UE-to-gateway path latency <= {self.max_latency} us from {self.region}"
        return "none"


@dataclass(frozen=True)
class ResourceRequest:
    service_type: ServiceType
    vnfs: tuple[VnfDemand, ...]

    def kinds(self) -> dict[VnfKind, int]:
        out: dict[VnfKind, int] = {}
        for v in self.vnfs:
            out[v.kind] = out.get(v.kind, 0) + 1
        return out


# Per-kind allocation table. Gateways grow with the number of participants they serve.
BASE_FORWARDER = Alloc(cpu=1, storage=1_000_000)
DISCOVERY_FN = Alloc(cpu=1, storage=100_000)
NRS_ALLOC = Alloc(cpu=2, storage=1_000_000)
MSA_ALLOC = Alloc(cpu=1, storage=100_000)
CONF_SERVICE_ALLOC = Alloc(cpu=1, storage=100_000)
PARTICIPANTS_PER_GATEWAY_CPU = 4


def gateway_alloc(count: int, cache_bytes: int) -> Alloc:
    return Alloc(cpu=1 + count // PARTICIPANTS_PER_GATEWAY_CPU, storage=1_000_000, cs_capacity=cache_bytes)


def translate_intent(intent: Intent) -> ResourceRequest:
    """Map an intent onto the VNFs, allocations and placement constraints it needs."""
    st = intent.service_type
    if st is ServiceType.BASE:
        vnfs = [VnfDemand(VnfKind.ICN_FORWARDER, Alloc(BASE_FORWARDER.cpu, BASE_FORWARDER.storage,
                                                       intent.cache_bytes), region=r, pin=r)
                for r, _ in intent.participants]
        vnfs.append(VnfDemand(VnfKind.DISCOVERY_FN, DISCOVERY_FN))
    elif st is ServiceType.MOBILITY:
        vnfs = [VnfDemand(VnfKind.NRS, NRS_ALLOC), VnfDemand(VnfKind.MSA, MSA_ALLOC)]
    elif st is ServiceType.CONFERENCE:
        vnfs = []
        seen: dict[NodeId, int] = {}
        for region, count in intent.participants:
            seen[region] = seen.get(region, 0) + count
        for region, count in seen.items():
            vnfs.append(VnfDemand(VnfKind.ICN_FORWARDER, gateway_alloc(count, intent.cache_bytes),
                                  region=region, max_latency=intent.sla.latency_bound,
                                  min_bandwidth=intent.sla.bandwidth_floor))
        vnfs.append(VnfDemand(VnfKind.CONF_SERVICE_FN, CONF_SERVICE_ALLOC))
    else:  # pragma: no cover - enum is closed
        raise Unsupported(str(st))
    return ResourceRequest(st, tuple(vnfs))


@dataclass
class SubstrateSnapshot:
    """Free resources per node plus the static latency view used for admission."""

    topology: Topology
    free_cpu: dict[NodeId, int]
    free_storage: dict[NodeId, int]

    def copy(self) -> SubstrateSnapshot:
        return SubstrateSnapshot(self.topology, dict(self.free_cpu), dict(self.free_storage))

    def satisfies(self, demand: VnfDemand, node: NodeId) -> bool:
        if demand.pin is not None:
            return node == demand.pin
        if demand.region is None:
            return True
        if demand.max_latency is not None:
            lat = self.topology.ue_latency(demand.region, node)
            if lat is None or lat > demand.max_latency:
                return False
        if demand.min_bandwidth is not None:
            bw = self.topology.ue_bandwidth(demand.region, node)
            if bw is None or bw < demand.min_bandwidth:
                return False
        return True

    def fits(self, demand: VnfDemand, node: NodeId) -> bool:
        return (self.free_cpu[node] >= demand.alloc.cpu
                and self.free_storage[node] >= demand.alloc.storage_total)

    def take(self, demand: VnfDemand, node: NodeId) -> None:
        self.free_cpu[node] -= demand.alloc.cpu
        self.free_storage[node] -= demand.alloc.storage_total


Placement = list[tuple[VnfDemand, NodeId]]


def place(request: ResourceRequest, snapshot: SubstrateSnapshot) -> Placement:
    """Greedy first-fit. Candidates that meet the constraints are tried in order
    of most free cpu, then node id; raises InsufficientResources naming the
    first VNF that cannot be hosted."""
    snap = snapshot.copy()
    placement: Placement = []
    for demand in request.vnfs:
        candidates = [n for n in snap.topology.nodes if snap.satisfies(demand, n)]
        if not candidates:
            raise InsufficientResources(demand.kind.value, f"no node meets constraint: {demand.describe_constraint()}")
        candidates.sort(key=lambda n: (-snap.free_cpu[n], n))
        chosen = next((n for n in candidates if snap.fits(demand, n)), None)
        if chosen is None:
            raise InsufficientResources(demand.kind.value, "not enough free cpu/storage on any eligible node")
        snap.take(demand, chosen)
        placement.append((demand, chosen))
    return placement


# -- slice objects ----------------------------------------------------------------


@dataclass
class VnfInstance:
    id: str
    kind: VnfKind
    node: NodeId
    alloc: Alloc
    slice: str
    region: Optional[NodeId] = None


@dataclass
class SliceContext:
    slice: str
    fib_rules: list[tuple[str, Name]] = field(default_factory=list)
    resolution_rules: list[tuple[str, Name]] = field(default_factory=list)
    trust_anchors: list[tuple[str, Name]] = field(default_factory=list)
    channels: list[int] = field(default_factory=list)


@dataclass
class Slice:
    id: str
    kind: ServiceType
    name_space: Name
    intent: Intent
    vnfs: list[VnfInstance] = field(default_factory=list)
    vlinks: list[tuple[str, str]] = field(default_factory=list)
    gateway: Optional[VnfInstance] = None
    status: SliceStatus = SliceStatus.PROVISIONING
    context: SliceContext = None  # type: ignore[assignment]
    participants: dict[str, Name] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.context is None:
            self.context = SliceContext(self.id)

    def gateways(self) -> list[VnfInstance]:
        return [v for v in self.vnfs if v.kind is VnfKind.ICN_FORWARDER]

    def gateway_locator(self, vnf: VnfInstance) -> Name:
        return self.name_space.append("gw", vnf.id)


# -- domain controller --------------------------------------------------------


class DomainController:
    """Applies rules to forwarders as direct state mutations, logging one control message each."""

    def __init__(self, sim: Simulation):
        self.sim = sim

    def _log(self, slice_id: str, target: str, op: str, prefix: Name) -> None:
        self.sim.trace.emit(self.sim.now, target, "control", slice=slice_id, target=target, op=op,
                            prefix=str(prefix))

    def install_fib(self, sl: Optional[Slice], slice_id: str, ep: ForwarderEndpoint, prefix: Name,
                    face: int, cost: int = 0) -> None:
        ep.fwd.install_fib(prefix, [(face, cost)])
        if sl is not None:
            sl.context.fib_rules.append((ep.id, prefix))
        self._log(slice_id, ep.id, "fib_install", prefix)

    def remove_fib(self, slice_id: str, ep: ForwarderEndpoint, prefix: Name) -> bool:
        if prefix not in ep.fwd.fib:
            return False
        ep.fwd.remove_fib(prefix)
        self._log(slice_id, ep.id, "fib_remove", prefix)
        return True

    def set_resolution(self, sl: Slice, ep: ForwarderEndpoint, prefix: Name) -> None:
        ep.fwd.set_resolution_rule(prefix)
        sl.context.resolution_rules.append((ep.id, prefix))
        self._log(sl.id, ep.id, "resolution_set", prefix)

    def unset_resolution(self, sl: Slice, ep: ForwarderEndpoint, prefix: Name) -> None:
        if prefix in ep.fwd.resolution_rules:
            ep.fwd.unset_resolution_rule(prefix)
            self._log(sl.id, ep.id, "resolution_unset", prefix)
        sl.context.resolution_rules = [(e, p) for e, p in sl.context.resolution_rules
                                       if not (e == ep.id and p == prefix)]

    def add_trust(self, sl: Slice, ep: ForwarderEndpoint, anchor: Name) -> None:
        ep.fwd.trust_anchors.add(anchor)
        sl.context.trust_anchors.append((ep.id, anchor))
        self._log(sl.id, ep.id, "trust_add", anchor)


# -- orchestrator -------------------------------------------------------------------------


class Orchestrator:
    """Intent intake, dispatch and the slice lifecycle on top of the domain controller."""

    def __init__(self, sim: Simulation):
        self.sim = sim
        self.controller = DomainController(sim)
        self.slices: dict[str, Slice] = {}
        self.vnfs: dict[str, VnfInstance] = {}

    # -- intake -------------------------------------------------------------

    def submit_intent(self, intent: Intent) -> Slice:
        st = intent.service_type
        if st is ServiceType.BASE:
            return self.bootstrap_base_slice(intent.cache_bytes)
        if st is ServiceType.MOBILITY:
            return self.bootstrap_mobility_slice()
        if st is ServiceType.CONFERENCE:
            return self.create_slice(intent)
        raise Unsupported(str(st))

    # -- views -----------------------------------------------------------------

    def active(self, slice_id: str) -> Optional[Slice]:
        sl = self.slices.get(slice_id)
        return sl if sl is not None and sl.status is SliceStatus.ACTIVE else None

    def usage(self) -> dict[NodeId, tuple[int, int]]:
        used = {n: (0, 0) for n in self.sim.topology.nodes}
        for v in self.vnfs.values():
            cpu, sto = used[v.node]
            used[v.node] = (cpu + v.alloc.cpu, sto + v.alloc.storage_total)
        return used

    def snapshot(self) -> SubstrateSnapshot:
        topo = self.sim.topology
        used = self.usage()
        return SubstrateSnapshot(
            topo,
            {n: topo.nodes[n].cpu_capacity - used[n][0] for n in topo.nodes},
            {n: topo.nodes[n].storage_capacity - used[n][1] for n in topo.nodes},
        )

    def check_resources(self) -> None:
        for node_id, (cpu, sto) in self.usage().items():
            node = self.sim.topology.nodes[node_id]
            if cpu > node.cpu_capacity or sto > node.storage_capacity:
                raise InvariantViolation(f"node {node_id} over capacity: cpu {cpu}/{node.cpu_capacity}, "
                                         f"storage {sto}/{node.storage_capacity}")

    # -- VNF lifecycle -----------------------------------------------------------

    def _instantiate(self, sl: Slice, placement: Placement) -> None:
        counters: dict[VnfKind, int] = {}
        for demand, node in placement:
            idx = counters.get(demand.kind, 0)
            counters[demand.kind] = idx + 1
            vnf = VnfInstance(f"{sl.id}-{demand.kind.value}-{idx}", demand.kind, node, demand.alloc, sl.id,
                              demand.region)
            self.vnfs[vnf.id] = vnf
            sl.vnfs.append(vnf)
            self._log_vnf(vnf, "placed")
            self.sim.spawn_vnf(vnf)
        self.check_resources()

    def _release(self, vnf: VnfInstance) -> None:
        self.sim.despawn_vnf(vnf)
        del self.vnfs[vnf.id]
        self._log_vnf(vnf, "released")

    def _log_vnf(self, vnf: VnfInstance, event: str) -> None:
        used_cpu, used_sto = self.usage()[vnf.node]
        node = self.sim.topology.nodes[vnf.node]
        self.sim.trace.emit(self.sim.now, vnf.node, "vnf", event=event, vnf=vnf.id, vnf_kind=vnf.kind.value,
                            slice=vnf.slice, cpu=vnf.alloc.cpu, storage=vnf.alloc.storage,
                            cs=vnf.alloc.cs_capacity, used_cpu=used_cpu, used_storage=used_sto,
                            cap_cpu=node.cpu_capacity, cap_storage=node.storage_capacity)

    def _set_status(self, sl: Slice, status: SliceStatus) -> None:
        sl.status = status
        self.sim.trace.emit(self.sim.now, "orchestrator", "slice", slice=sl.id, event=status.value,
                            service=sl.kind.value, vnfs=len(sl.vnfs))

    def _admit(self, sl: Slice) -> None:
        self.slices[sl.id] = sl
        self._set_status(sl, SliceStatus.PROVISIONING)
        try:
            placement = place(translate_intent(sl.intent), self.snapshot())
        except InsufficientResources as exc:
            self.sim.trace.emit(self.sim.now, "orchestrator", "slice", slice=sl.id, event="rejected",
                                service=sl.kind.value, vnfs=0, reason=str(exc))
            del self.slices[sl.id]
            raise
        self._instantiate(sl, placement)

    def _check_namespace(self, slice_id: str, ns: Name) -> None:
        for reserved in RESERVED:
            if overlaps(ns, reserved):
                raise NamespaceConflict(f"{ns} overlaps reserved {reserved}")
        for other in self.slices.values():
            if other.status is SliceStatus.ACTIVE and overlaps(ns, other.name_space):
                raise NamespaceConflict(f"{ns} overlaps {other.name_space} of slice {other.id}")

    # -- base slice -------------------------------------------------------

    def bootstrap_base_slice(self, cs_capacity: int = 0) -> Slice:
        if self.active(BASE_SLICE_ID) is not None:
            raise AlreadyActive("base slice already active")
        poas = self.sim.topology.poas()
        intent = Intent(ServiceType.BASE, tuple((p.id, 0) for p in poas), slice_id=BASE_SLICE_ID,
                        name_space=BASE_NS, cache_bytes=cs_capacity)
        sl = Slice(BASE_SLICE_ID, ServiceType.BASE, BASE_NS, intent)
        self._admit(sl)
        sim, ctl = self.sim, self.controller
        disc = sim.endpoints[next(v.id for v in sl.vnfs if v.kind is VnfKind.DISCOVERY_FN)]
        fwds = [v for v in sl.vnfs if v.kind is VnfKind.ICN_FORWARDER]
        sl.gateway = None
        faces_to: dict[tuple[str, str], int] = {}
        for v in fwds:
            ep = sim.endpoints[v.id]
            ch = sim.connect(ep, disc)
            sl.context.channels.append(ch.id)
            sl.vlinks.append((v.id, disc.id))
            ctl.install_fib(sl, sl.id, ep, BASE_NS, ch.face_of(ep))
            ctl.install_fib(sl, sl.id, ep, TRUST_NS, ch.face_of(ep))
        for i, a in enumerate(fwds):
            for b in fwds[i + 1:]:
                ea, eb = sim.endpoints[a.id], sim.endpoints[b.id]
                ch = sim.connect(ea, eb)
                sl.context.channels.append(ch.id)
                sl.vlinks.append((a.id, b.id))
                faces_to[(a.id, b.id)] = ch.face_of(ea)
                faces_to[(b.id, a.id)] = ch.face_of(eb)
        for a in fwds:
            for b in fwds:
                if a is not b:
                    loc = sim.topology.nodes[b.node].locator_prefix
                    ctl.install_fib(sl, sl.id, sim.endpoints[a.id], loc, faces_to[(a.id, b.id)])
        self._set_status(sl, SliceStatus.ACTIVE)
        return sl

    # -- mobility slice ------------------------------------------------------

    def bootstrap_mobility_slice(self) -> Slice:
        if self.active(MOBILITY_SLICE_ID) is not None:
            raise AlreadyActive("mobility slice already active")
        self._require_base()
        intent = Intent(ServiceType.MOBILITY, slice_id=MOBILITY_SLICE_ID, name_space=MOBILITY_NS,
                        network_services=frozenset({NetworkService.MOBILITY}))
        sl = Slice(MOBILITY_SLICE_ID, ServiceType.MOBILITY, MOBILITY_NS, intent)
        self._admit(sl)
        msa = next(v for v in sl.vnfs if v.kind is VnfKind.MSA)
        nrs = next(v for v in sl.vnfs if v.kind is VnfKind.NRS)
        sl.vlinks.append((msa.id, nrs.id))
        self.sim.mobility.deploy(msa.node, nrs.node)
        self._set_status(sl, SliceStatus.ACTIVE)
        return sl

    def _require_base(self) -> Slice:
        base = self.active(BASE_SLICE_ID)
        if base is None:
            raise PreconditionError("base slice is not active")
        return base

    # -- service slices ------------------------------------------------------

    def create_slice(self, intent: Intent) -> Slice:
        if intent.service_type is not ServiceType.CONFERENCE:
            raise Unsupported(f"create_slice handles conference intents, got {intent.service_type.value}")
        self._require_base()
        slice_id = intent.slice_id or f"conf{len(self.slices)}"
        ns = intent.name_space or Name.of(slice_id)
        if self.active(slice_id) is not None:
            raise AlreadyActive(f"slice {slice_id} already active")
        self._check_namespace(slice_id, ns)
        sl = Slice(slice_id, ServiceType.CONFERENCE, ns, intent)
        self._admit(sl)
        self._wire_conference(sl)
        self._set_status(sl, SliceStatus.ACTIVE)
        return sl

    def _wire_conference(self, sl: Slice) -> None:
        sim, ctl = self.sim, self.controller
        gws = sl.gateways()
        sl.gateway = gws[0]
        svc = sim.endpoints[next(v.id for v in sl.vnfs if v.kind is VnfKind.CONF_SERVICE_FN)]
        bases = [(p, sim.base_forwarder(p.id)) for p in sim.topology.poas()]
        bases = [(p, b) for p, b in bases if b is not None]
        base_face: dict[tuple[str, str], int] = {}
        for gw in gws:
            gep = sim.endpoints[gw.id]
            ctl.add_trust(sl, gep, sl.name_space)
            ch = sim.connect(gep, svc)
            sl.context.channels.append(ch.id)
            sl.vlinks.append((gw.id, svc.id))
            ctl.install_fib(sl, sl.id, gep, sl.name_space.append("roster"), ch.face_of(gep))
            for poa, bep in bases:
                ch = sim.connect(gep, bep)
                sl.context.channels.append(ch.id)
                sl.vlinks.append((gw.id, bep.id))
                base_face[(gw.id, poa.id)] = ch.face_of(bep)
                ctl.install_fib(sl, sl.id, gep, poa.locator_prefix, ch.face_of(gep))
        for poa, bep in bases:
            ctl.add_trust(sl, bep, sl.name_space)
            near = self.nearest_gateway(sl, poa.id)
            ctl.install_fib(sl, sl.id, bep, sl.name_space, base_face[(near.id, poa.id)])
            for gw in gws:
                ctl.install_fib(sl, sl.id, bep, sl.gateway_locator(gw), base_face[(gw.id, poa.id)])

    def nearest_gateway(self, sl: Slice, poa: NodeId) -> VnfInstance:
        topo = self.sim.topology

        def key(v: VnfInstance):
            lat = topo.ue_latency(poa, v.node)
            return (lat if lat is not None else float("inf"), v.id)

        return min(sl.gateways(), key=key)

    # -- participants (conference network controller) ---------------------------------

    def gateway_face_to(self, sl: Slice, gw: VnfInstance, poa: NodeId) -> Optional[int]:
        sim = self.sim
        base = sim.base_forwarder(poa)
        if base is None:
            return None
        gep = sim.endpoints[gw.id]
        return sim.face_between(gep, base)

    def route_participant(self, sl: Slice, prefix: Name, poa: NodeId) -> None:
        """Static producer routes: every gateway points the prefix at the producer's PoA."""
        for gw in sl.gateways():
            face = self.gateway_face_to(sl, gw, poa)
            if face is not None:
                self.controller.install_fib(sl, sl.id, self.sim.endpoints[gw.id], prefix, face)

    def join_participant(self, slice_id: str, ue_id: str) -> Name:
        sl = self.active(slice_id)
        if sl is None:
            raise NotFound(f"slice {slice_id}")
        rt = self.sim.ues[ue_id]
        prefix = sl.name_space.append(ue_id)
        sl.participants[ue_id] = prefix
        self.sim.register_app_name(ue_id, prefix)
        if rt.ue.attached_poa is not None:
            self.route_participant(sl, prefix, rt.ue.attached_poa)
        self.sim.trace.emit(self.sim.now, "orchestrator", "join", ue=ue_id, slice=slice_id, prefix=str(prefix))
        return prefix

    # -- mobility on demand -------------------------------------------------------

    def _owner(self, prefix: Name) -> Optional[str]:
        for ue_id, rt in self.sim.ues.items():
            if any(name.is_prefix_of(prefix) or prefix.is_prefix_of(name) for name in rt.ue.app_names):
                return ue_id
        return None

    def enable_mobility(self, slice_id: str, prefixes: Iterable[Name]) -> None:
        sl = self.active(slice_id)
        if sl is None:
            raise NotFound(f"slice {slice_id}")
        prefixes = list(prefixes)
        for p in prefixes:
            if not sl.name_space.is_prefix_of(p):
                raise Rejected(f"{p} is outside slice name space {sl.name_space}")
        if self.active(MOBILITY_SLICE_ID) is None:
            self.bootstrap_mobility_slice()
        mob = self.sim.mobility
        for p in prefixes:
            mob.msa.policy.add(p)
            mob.enabled[p] = slice_id
            owner = self._owner(p)
            poa = self.sim.ues[owner].ue.attached_poa if owner is not None else None
            if poa is not None:
                mob.register_now(p, self.sim.topology.nodes[poa].locator_prefix)
            for gw in sl.gateways():
                self.controller.set_resolution(sl, self.sim.endpoints[gw.id], p)
            self.sim.trace.emit(self.sim.now, "orchestrator", "mobility", event="enabled", slice=slice_id,
                                prefix=str(p))

    def disable_mobility(self, slice_id: str, prefixes: Iterable[Name]) -> None:
        sl = self.active(slice_id)
        if sl is None:
            raise NotFound(f"slice {slice_id}")
        mob = self.sim.mobility
        for p in prefixes:
            if mob.enabled.get(p) != slice_id:
                raise NotFound(f"mobility not enabled for {p} in {slice_id}")
            for gw in sl.gateways():
                self.controller.unset_resolution(sl, self.sim.endpoints[gw.id], p)
            mob.msa.policy.discard(p)
            del mob.enabled[p]
            mob.deregister_now(p)
            owner = self._owner(p)
            poa = self.sim.ues[owner].ue.attached_poa if owner is not None else None
            if poa is not None:
                self.route_participant(sl, p, poa)
            self.sim.trace.emit(self.sim.now, "orchestrator", "mobility", event="disabled", slice=slice_id,
                                prefix=str(p))

    # -- teardown ------------------------------------------------------------------------

    def teardown_slice(self, slice_id: str) -> None:
        sl = self.active(slice_id)
        if sl is None:
            raise NotFound(f"slice {slice_id}")
        others = [s for s in self.slices.values() if s.status is SliceStatus.ACTIVE and s.id != slice_id]
        if sl.kind is ServiceType.BASE and others:
            raise Rejected("base slice cannot be torn down while other slices are active")
        sim, ctl, mob = self.sim, self.controller, self.sim.mobility

        if sl.kind is ServiceType.MOBILITY:
            for p, owner_slice in sorted(mob.enabled.items()):
                self.disable_mobility(owner_slice, [p])
            mob.undeploy()
        for ep_id, prefix in reversed(sl.context.resolution_rules):
            ep = sim.endpoints.get(ep_id)
            if ep is not None and prefix in ep.fwd.resolution_rules:
                ep.fwd.unset_resolution_rule(prefix)
                ctl._log(sl.id, ep_id, "resolution_unset", prefix)
        sl.context.resolution_rules.clear()
        for ep_id, prefix in reversed(sl.context.fib_rules):
            ep = sim.endpoints.get(ep_id)
            if ep is not None:
                ctl.remove_fib(sl.id, ep, prefix)
        sl.context.fib_rules.clear()
        for ep_id, anchor in sl.context.trust_anchors:
            ep = sim.endpoints.get(ep_id)
            if ep is not None:
                ep.fwd.trust_anchors.discard(anchor)
        sl.context.trust_anchors.clear()

        if sl.kind is ServiceType.CONFERENCE:
            for p in [p for p, s in mob.enabled.items() if s == slice_id]:
                mob.msa.policy.discard(p)
                del mob.enabled[p]
            for name, rec in sorted(mob.nrs.records.items()):
                if sl.name_space.is_prefix_of(name) and rec.registered:
                    mob.deregister_now(name)
            sim.purge_namespace(sl.id, sl.name_space)

        for ch_id in sl.context.channels:
            sim.disconnect(ch_id)
        sl.context.channels.clear()
        for vnf in list(sl.vnfs):
            self._release(vnf)
        self._set_status(sl, SliceStatus.TORN_DOWN)
