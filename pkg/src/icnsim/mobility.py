"""Mobility slice: name resolution service, resolution agent and PoA redirects.

Mobile names keep their identity while the network tracks their current
point of attachment. Consumers' Interests get the locator attached as a
forwarding hint (late binding); the application name is never rewritten.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import TYPE_CHECKING, Optional

from .errors import ResolutionFailed
from .names import Name
from .packets import Data, Interest

if TYPE_CHECKING:
    from .endpoints import ForwarderEndpoint
    from .sim import Simulation

log = logging.getLogger(__name__)

MOBILITY_NS = Name.of("mobility")
DEFAULT_GRACE_US = 500_000


class UpdateResult(str, Enum):
    ACCEPTED = "Accepted"
    STALE_SEQ = "StaleSeq"


@dataclass
class NrsRecord:
    name: Name
    locator: Optional[Name]
    seq: int
    previous_locator: Optional[Name] = None
    registered: bool = True


@dataclass(frozen=True)
class RedirectEntry:
    name: Name
    new_locator: Name
    expiry: int


class Nrs:
    """Authoritative name -> locator store with per-name sequence numbers."""

    def __init__(self) -> None:
        self.records: dict[Name, NrsRecord] = {}

    def current_seq(self, name: Name) -> int:
        rec = self.records.get(name)
        return rec.seq if rec is not None else 0

    def register(self, name: Name, locator: Name, seq: int) -> UpdateResult:
        old = self.records.get(name)
        if old is not None and seq <= old.seq:
            return UpdateResult.STALE_SEQ
        previous = None
        if old is not None:
            previous = old.locator if old.locator != locator else old.previous_locator
        self.records[name] = NrsRecord(name, locator, seq, previous, True)
        return UpdateResult.ACCEPTED

    def deregister(self, name: Name, seq: int) -> UpdateResult:
        old = self.records.get(name)
        if old is None:
            self.records[name] = NrsRecord(name, None, seq, None, False)
            return UpdateResult.ACCEPTED
        if seq <= old.seq:
            return UpdateResult.STALE_SEQ
        self.records[name] = replace(old, seq=seq, registered=False)
        return UpdateResult.ACCEPTED

    def resolve(self, name: Name) -> Optional[Name]:
        for prefix in name.prefixes():
            rec = self.records.get(prefix)
            if rec is not None and rec.registered:
                return rec.locator
        return None


nrs_register = Nrs.register
nrs_deregister = Nrs.deregister
nrs_resolve = Nrs.resolve


class Msa:
    """Resolution front-end that other slices call; forwards lookups to the NRS."""

    def __init__(self, nrs: Nrs):
        self.nrs = nrs
        self.policy: set[Name] = set()
        self.calls = 0
        self.signaling_messages = 0

    def resolve(self, interest: Interest) -> Interest:
        if interest.forwarding_hint is not None:
            raise ValueError("interest already carries a forwarding hint")
        self.calls += 1
        self.signaling_messages += 2
        locator = self.nrs.resolve(interest.name)
        if locator is None:
            raise ResolutionFailed(str(interest.name))
        return interest.with_hint(locator)

    def allows(self, name: Name) -> bool:
        return any(p.is_prefix_of(name) for p in self.policy)


msa_resolve = Msa.resolve


def _signal_name(verb: str, name: Name) -> Name:
    return MOBILITY_NS.append(verb).extend(name)


class MobilityRuntime:
    """Runs NRS/MSA exchanges as /mobility packets on the simulation timeline."""

    def __init__(self, sim: Simulation, grace: int = DEFAULT_GRACE_US):
        self.sim = sim
        self.grace = grace
        self.nrs = Nrs()
        self.msa = Msa(self.nrs)
        self.msa_node: Optional[str] = None
        self.nrs_node: Optional[str] = None
        # mobile prefix -> owning slice id
        self.enabled: dict[Name, str] = {}
        self.ue_seq: dict[Name, int] = {}

    @property
    def deployed(self) -> bool:
        return self.msa_node is not None and self.nrs_node is not None

    def deploy(self, msa_node: str, nrs_node: str) -> None:
        self.msa_node, self.nrs_node = msa_node, nrs_node

    def undeploy(self) -> None:
        self.msa_node = self.nrs_node = None

    def is_mobile(self, name: Name) -> bool:
        return any(p.is_prefix_of(name) for p in self.enabled)

    # -- signaling helpers ---------------------------------------------------

    def _signal(self, msg: str, src: str, dst: str, packet, then) -> None:
        sim = self.sim
        sim.trace.emit(sim.now, src, "signal", msg=msg, src=src, dst=dst, name=str(packet.name))
        sim.transmit_between_nodes(src, dst, packet, then)

    def _nonce(self) -> int:
        return self.sim.next_nonce()

    # -- registration (control path, used by enable/disable) ------------------

    def next_seq(self, name: Name) -> int:
        seq = max(self.ue_seq.get(name, 0), self.nrs.current_seq(name)) + 1
        self.ue_seq[name] = seq
        return seq

    def register_now(self, name: Name, locator: Name) -> UpdateResult:
        seq = self.next_seq(name)
        result = self.nrs.register(name, locator, seq)
        self.sim.trace.emit(self.sim.now, self.nrs_node or "-", "nrs", op="register", name=str(name),
                            seq=seq, locator=str(locator), result=result.value)
        return result

    def deregister_now(self, name: Name) -> UpdateResult:
        seq = self.next_seq(name)
        result = self.nrs.deregister(name, seq)
        self.sim.trace.emit(self.sim.now, self.nrs_node or "-", "nrs", op="deregister", name=str(name),
                            seq=seq, result=result.value)
        return result

    # -- late binding ---------------------------------------------------------

    def request_resolution(self, fwd: ForwarderEndpoint, face: int, interest: Interest) -> None:
        sim = self.sim
        started = sim.now
        sim.trace.emit(sim.now, fwd.id, "resolve_invoke", name=str(interest.name))
        if not self.deployed:
            sim.trace.emit(sim.now, fwd.id, "drop", reason="NoRoute", name=str(interest.name),
                           cause="ResolutionFailed")
            return
        request = Interest(_signal_name("resolve", interest.name), self._nonce(), lifetime=interest.lifetime)

        lookup = Interest(_signal_name("lookup", interest.name), self._nonce(), lifetime=interest.lifetime)

        def at_msa() -> None:
            self._signal("nrs_lookup", self.msa_node, self.nrs_node, lookup, at_nrs)

        def at_nrs() -> None:
            try:
                if not self.msa.allows(interest.name):
                    raise ResolutionFailed(f"{interest.name} not enabled for mobility")
                resolved: Optional[Interest] = self.msa.resolve(interest)
            except ResolutionFailed:
                resolved = None
            locator = resolved.forwarding_hint if resolved is not None else None
            sim.trace.emit(sim.now, self.nrs_node, "msa_resolve", name=str(interest.name),
                           result=str(locator) if locator is not None else "ResolutionFailed")
            reply = Data(lookup.name, str(locator or "").encode())
            self._signal("nrs_lookup_reply", self.nrs_node, self.msa_node, reply,
                         lambda: self._signal("resolve_reply", self.msa_node, fwd.node,
                                              Data(request.name, reply.payload),
                                              lambda: back_at_forwarder(resolved)))

        def back_at_forwarder(resolved: Optional[Interest]) -> None:
            if resolved is None:
                sim.trace.emit(sim.now, fwd.id, "drop", reason="NoRoute", name=str(interest.name),
                               cause="ResolutionFailed")
                return
            if not fwd.alive or face not in fwd.fwd.faces:
                sim.trace.emit(sim.now, fwd.id, "drop", reason="NoRoute", name=str(interest.name),
                               cause="FaceGone")
                return
            remaining = interest.lifetime - (sim.now - started)
            fwd.receive(face, replace(resolved, lifetime=max(remaining, 1)))

        self._signal("resolve", fwd.node, self.msa_node, request, at_msa)

    # -- handover -------------------------------------------------------------

    def on_attached(self, ue_id: str, poa: str) -> None:
        """New PoA registers the UE's mobile names; NRS pushes a redirect to the old PoA."""
        if not self.deployed:
            return
        sim = self.sim
        ue = sim.ues[ue_id].ue
        locator = sim.topology.nodes[poa].locator_prefix
        for name in sorted(ue.app_names):
            if not self.is_mobile(name):
                continue
            seq = self.next_seq(name)
            reg = Interest(_signal_name("register", name), self._nonce(),
                           context=(("locator", str(locator)), ("seq", str(seq))))
            self._signal("register", poa, self.nrs_node, reg,
                         lambda name=name, seq=seq, reg=reg: self._apply_register(name, locator, seq, poa, reg))

    def _apply_register(self, name: Name, locator: Name, seq: int, poa: str, reg: Interest) -> None:
        sim = self.sim
        before = self.nrs.records.get(name)
        old_locator = before.locator if before is not None and before.registered else None
        result = self.nrs.register(name, locator, seq)
        sim.trace.emit(sim.now, self.nrs_node, "nrs", op="register", name=str(name), seq=seq,
                       locator=str(locator), result=result.value)
        self._signal("register_ack", self.nrs_node, poa, Data(reg.name, result.value.encode()), lambda: None)
        if result is not UpdateResult.ACCEPTED or old_locator is None or old_locator == locator:
            return
        old_poa = sim.topology.poa_by_locator(old_locator)
        if old_poa is None:
            return
        notify = Interest(_signal_name("notify", name), self._nonce(), context=(("locator", str(locator)),))
        self._signal("notify", self.nrs_node, old_poa.id, notify,
                     lambda: self._install_redirect(old_poa.id, name, locator, notify))

    def _install_redirect(self, poa: str, name: Name, locator: Name, notify: Interest) -> None:
        sim = self.sim
        base = sim.base_forwarder(poa)
        if base is not None:
            entry = RedirectEntry(name, locator, sim.now + self.grace)
            base.fwd.redirects[name] = entry
            sim.trace.emit(sim.now, base.id, "redirect_installed", name=str(name), locator=str(locator),
                           expiry=entry.expiry)
        self._signal("notify_ack", poa, self.nrs_node, Data(notify.name, b"ok"), lambda: None)


def handover(sim: Simulation, ue_id: str, to_poa: str, gap: int) -> None:
    """Detach ``ue_id`` now and re-attach it at ``to_poa`` after ``gap`` microseconds."""
    sim.handover(ue_id, to_poa, gap)
