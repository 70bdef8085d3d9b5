"""Conference service slice application: discovery, producers and fetch loops."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .codec import T_NAME, decode_name, decode_nested_name, encode_name, iter_tlvs, tlv
from .endpoints import AppEndpoint
from .errors import DiscoveryNotFound, MalformedPacket, PreconditionError
from .names import Name
from .packets import Data, Interest, make_data
from .substrate import EventKind

if TYPE_CHECKING:
    from .sim import Simulation

log = logging.getLogger(__name__)

T_GATEWAY_LOCATOR = 0x30
T_NAME_SPACE = 0x31
T_TRUST_ANCHOR = 0x32
T_ERROR = 0x3F

DISCOVERY_KEY = Name.of("discovery", "KEY")
DEFAULT_MEDIA = "video"
DEFAULT_CHUNK_SIZE = 1200
DEFAULT_DATA_FRESHNESS = 10_000_000
MAX_RETRANSMISSIONS = 3


@dataclass(frozen=True)
class DiscoveryResponse:
    gateway_locator: Name
    name_space: Name
    trust_anchors: tuple[Name, ...]


def encode_discovery_response(resp: DiscoveryResponse) -> bytes:
    parts = [tlv(T_GATEWAY_LOCATOR, encode_name(resp.gateway_locator)),
             tlv(T_NAME_SPACE, encode_name(resp.name_space))]
    parts += [tlv(T_TRUST_ANCHOR, encode_name(a)) for a in resp.trust_anchors]
    return b"".join(parts)


def encode_discovery_error(message: str) -> bytes:
    return tlv(T_ERROR, message.encode("utf-8"))


def decode_discovery_response(payload: bytes) -> DiscoveryResponse:
    elements = list(iter_tlvs(payload))
    if len(elements) == 1 and elements[0][0] == T_ERROR:
        raise DiscoveryNotFound(elements[0][1].decode("utf-8", "replace"))
    if len(elements) < 2 or elements[0][0] != T_GATEWAY_LOCATOR or elements[1][0] != T_NAME_SPACE:
        raise MalformedPacket("discovery response needs GatewayLocator then NameSpace")
    anchors = []
    for type_, value in elements[2:]:
        if type_ != T_TRUST_ANCHOR:
            raise MalformedPacket(f"unexpected TLV 0x{type_:02x} in discovery response")
        anchors.append(decode_nested_name(value))
    return DiscoveryResponse(decode_nested_name(elements[0][1]), decode_nested_name(elements[1][1]),
                             tuple(anchors))


def encode_roster(prefixes: list[Name]) -> bytes:
    return b"".join(encode_name(p) for p in prefixes)


def decode_roster(payload: bytes) -> list[Name]:
    out = []
    for type_, value in iter_tlvs(payload):
        if type_ != T_NAME:
            raise MalformedPacket("roster holds only names")
        out.append(decode_name(value))
    return out


def chunk_name(prefix: Name, media: str, seq: int) -> Name:
    return prefix.append(media, str(seq))


def chunk_payload(name: Name, size: int) -> bytes:
    seed = str(name).encode()
    return (seed * (size // max(len(seed), 1) + 1))[:size]


class FetchFlow:
    """Sequential pull of ``target/<media>/<seq>`` with timeout-driven retransmission."""

    def __init__(self, app: ParticipantApp, flow_id: str, target: Name, *, lifetime: int,
                 media: str = DEFAULT_MEDIA, rate: Optional[float] = None, count: Optional[int] = None,
                 start_seq: int = 0, retransmissions: int = MAX_RETRANSMISSIONS):
        self.app = app
        self.id = flow_id
        self.target = target
        self.media = media
        self.lifetime = lifetime
        self.period = int(1_000_000 / rate) if rate else 0
        self.count = count
        self.retransmissions = retransmissions
        self.seq = start_seq
        self.end_seq = None if count is None else start_seq + count
        self.attempt = 0
        self.chunk_started = 0
        self.outstanding: Optional[Name] = None
        self.timer = None
        self.done = False
        self.received: list[int] = []
        self.lost: list[int] = []
        self.timeouts = 0

    @property
    def sim(self) -> Simulation:
        return self.app.sim

    def start(self) -> None:
        self.chunk_started = self.sim.now
        self._send()

    def _send(self) -> None:
        sim = self.sim
        name = chunk_name(self.target, self.media, self.seq)
        interest = Interest(name, sim.next_nonce(), lifetime=self.lifetime, hop_limit=sim.config.hop_limit)
        self.outstanding = name
        sim.trace.emit(sim.now, self.app.id, "c_interest", flow=self.id, seq=self.seq, attempt=self.attempt,
                       name=str(name))
        self.timer = sim.engine.schedule_in(self.lifetime, EventKind.TIMER_FIRE, self._on_timeout,
                                            self.seq, self.attempt)
        self.app.send(interest)

    def on_data(self, data: Data) -> bool:
        if self.outstanding is None or data.name != self.outstanding:
            return False
        sim = self.sim
        self.timer.cancel()
        self.outstanding = None
        self.received.append(self.seq)
        sim.trace.emit(sim.now, self.app.id, "c_data", flow=self.id, seq=self.seq, attempt=self.attempt,
                       latency=sim.now - self.chunk_started)
        self._advance()
        return True

    def _on_timeout(self, seq: int, attempt: int) -> None:
        if self.done or seq != self.seq or attempt != self.attempt or self.outstanding is None:
            return
        sim = self.sim
        self.timeouts += 1
        self.outstanding = None
        sim.trace.emit(sim.now, self.app.id, "c_timeout", flow=self.id, seq=seq, attempt=attempt)
        if self.attempt < self.retransmissions:
            self.attempt += 1
            self._send()
            return
        self.lost.append(seq)
        sim.trace.emit(sim.now, self.app.id, "c_lost", flow=self.id, seq=seq)
        self._advance()

    def _advance(self) -> None:
        self.seq += 1
        self.attempt = 0
        if self.end_seq is not None and self.seq >= self.end_seq:
            self.done = True
            return
        at = max(self.sim.now, self.chunk_started + self.period)

        def go() -> None:
            if not self.done:
                self.chunk_started = self.sim.now
                self._send()

        self.sim.engine.schedule(at, EventKind.TIMER_FIRE, go)

    def stop(self) -> None:
        self.done = True
        if self.timer is not None:
            self.timer.cancel()

    def in_flight(self) -> int:
        return 1 if self.outstanding is not None else 0


# -- endpoints -------------------------------------------------------------------------


class ParticipantApp(AppEndpoint):
    """The application instance on a UE: consumer, producer and discovery client."""

    def __init__(self, sim: Simulation, ue_id: str):
        super().__init__(sim, f"app:{ue_id}", node=None)
        self.ue_id = ue_id
        self.published: dict[Name, Data] = {}
        self.flows: dict[str, FetchFlow] = {}
        self.discovered: dict[str, DiscoveryResponse] = {}
        self.gateway: dict[str, Name] = {}
        self._pending_discovery: dict[Name, tuple[str, bool]] = {}
        self.chunk_size = sim.config.chunk_size
        self.errors: list[str] = []

    # -- application bootstrap ------------------------------------------------

    def bootstrap(self, slice_id: str, join: bool = True) -> Name:
        sim = self.sim
        rt = sim.ues[self.ue_id]
        if rt.ue.attached_poa is None:
            raise PreconditionError(f"UE {self.ue_id} must be attached before discovery")
        locator = sim.topology.nodes[rt.ue.attached_poa].locator_prefix
        name = Name.of("discovery", "conf", slice_id)
        interest = Interest(name, sim.next_nonce(), lifetime=sim.config.interest_lifetime,
                            hop_limit=sim.config.hop_limit, context=(("poa", str(locator)),))
        self._pending_discovery[name] = (slice_id, join)
        self.send(interest)
        return name

    def _on_discovery(self, data: Data) -> None:
        slice_id, join = self._pending_discovery.pop(data.name)
        sim = self.sim
        try:
            resp = decode_discovery_response(data.payload)
        except DiscoveryNotFound as exc:
            self.errors.append(f"discovery {slice_id}: {exc}")
            sim.trace.emit(sim.now, self.id, "discovery", ue=self.ue_id, slice=slice_id, result="NotFound")
            return
        self.discovered[slice_id] = resp
        self.gateway[slice_id] = resp.gateway_locator
        sim.trace.emit(sim.now, self.id, "discovery", ue=self.ue_id, slice=slice_id, result="ok",
                       gateway=str(resp.gateway_locator))
        sim.install_discovery(self.ue_id, resp)
        if join:
            sim.orchestrator.join_participant(slice_id, self.ue_id)

    # -- producer -----------------------------------------------------------------------

    def producer_prefix(self, name: Name) -> Optional[Name]:
        for prefix in self.sim.ues[self.ue_id].ue.app_names:
            if prefix.is_prefix_of(name):
                return prefix
        return None

    def publish(self, prefix: Name, seq: int, media: str = DEFAULT_MEDIA) -> Data:
        name = chunk_name(prefix, media, seq)
        data = self.published.get(name)
        if data is None:
            key = prefix.append("KEY")
            data = make_data(name, chunk_payload(name, self.chunk_size), key, self.sim.config.data_freshness)
            self.published[name] = data
            self.sim.trace.emit(self.sim.now, self.id, "publish", name=str(name))
        return data

    def _on_interest(self, interest: Interest) -> None:
        prefix = self.producer_prefix(interest.name)
        rest = interest.name.components[len(prefix.components):] if prefix is not None else ()
        if prefix is None or len(rest) != 2 or not rest[1].isdigit():
            self.sim.trace.emit(self.sim.now, self.id, "app_ignore", name=str(interest.name))
            return
        self.send(self.publish(prefix, int(rest[1]), rest[0]))

    # -- consumer -----------------------------------------------------------------------

    def start_fetch(self, target: Name, **kwargs) -> FetchFlow:
        flow_id = f"{self.ue_id}->{target}"
        n = 1
        while flow_id in self.flows:
            n += 1
            flow_id = f"{self.ue_id}->{target}#{n}"
        kwargs.setdefault("lifetime", self.sim.config.interest_lifetime)
        flow = FetchFlow(self, flow_id, target, **kwargs)
        self.flows[flow_id] = flow
        flow.start()
        return flow

    # -- dispatch -----------------------------------------------------------------------

    def receive(self, face: int, packet) -> None:
        if isinstance(packet, Interest):
            self._on_interest(packet)
            return
        if packet.name in self._pending_discovery:
            self._on_discovery(packet)
            return
        for flow in self.flows.values():
            if flow.on_data(packet):
                return
        self.sim.trace.emit(self.sim.now, self.id, "app_late_data", name=str(packet.name))


class DiscoveryFunction(AppEndpoint):
    """Base-slice service function answering /discovery and /trust requests."""

    def receive(self, face: int, packet) -> None:
        if not isinstance(packet, Interest):
            return
        sim = self.sim
        comps = packet.name.components
        orch = sim.orchestrator
        sim.trace.emit(sim.now, self.id, "discovery_request", name=str(packet.name))
        if len(comps) >= 3 and comps[0] in ("discovery", "trust") and comps[1] == "conf":
            sl = orch.active(comps[2])
            if sl is None or sl.kind.value != "conference":
                payload = encode_discovery_error("NotFound")
            else:
                poa_text = packet.context_value("poa")
                poa = sim.topology.poa_by_locator(Name.parse(poa_text)) if poa_text else None
                if poa is not None:
                    gw = orch.nearest_gateway(sl, poa.id)
                else:
                    gw = sl.gateways()[0]
                payload = encode_discovery_response(
                    DiscoveryResponse(sl.gateway_locator(gw), sl.name_space, (sl.name_space,)))
        else:
            payload = encode_discovery_error("NotFound")
        self.send(make_data(packet.name, payload, DISCOVERY_KEY, freshness=0), face)


class ConfServiceFunction(AppEndpoint):
    """Conference service logic: serves the participant roster of its slice."""

    def __init__(self, sim: Simulation, vnf_id: str, node: str, slice_id: str):
        super().__init__(sim, vnf_id, node)
        self.slice_id = slice_id

    def receive(self, face: int, packet) -> None:
        if not isinstance(packet, Interest):
            return
        sl = self.sim.orchestrator.slices[self.slice_id]
        if packet.name != sl.name_space.append("roster"):
            return
        prefixes = [sl.participants[u] for u in sorted(sl.participants)]
        key = sl.name_space.append("service", "KEY")
        self.send(make_data(packet.name, encode_roster(prefixes), key, freshness=0), face)
