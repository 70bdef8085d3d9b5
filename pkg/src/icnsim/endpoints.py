"""Packet endpoints (forwarders and applications) and the channels joining them."""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Optional

from .errors import NotFound
from .forwarder import (Aggregated, Drop, Forwarder, InvokeResolution, Redirected, SendData,
                        SendInterest)
from .packets import Interest
from .substrate import LinkQueue

if TYPE_CHECKING:
    from .sim import Simulation


class Endpoint:
    def __init__(self, sim: Simulation, id: str, node: Optional[str]):
        self.sim = sim
        self.id = id
        self.node = node
        self.alive = True

    def add_face(self) -> int:
        raise NotImplementedError

    def drop_face(self, face: int) -> None:
        raise NotImplementedError

    def receive(self, face: int, packet) -> None:
        raise NotImplementedError


@dataclass
class Channel:
    """A virtual link between two endpoints, mapped onto a physical path in each direction."""

    id: int
    a: Endpoint
    face_a: int
    b: Endpoint
    face_b: int
    path_ab: list[LinkQueue]
    path_ba: list[LinkQueue]
    open: bool = True

    def face_of(self, ep: Endpoint) -> int:
        if ep is self.a:
            return self.face_a
        if ep is self.b:
            return self.face_b
        raise NotFound(f"{ep.id} is not on channel {self.id}")

    def peer(self, ep: Endpoint) -> tuple[Endpoint, int, list[LinkQueue]]:
        if ep is self.a:
            return self.b, self.face_b, self.path_ab
        return self.a, self.face_a, self.path_ba


class ForwarderEndpoint(Endpoint):
    def __init__(self, sim: Simulation, id: str, node: Optional[str], fwd: Forwarder,
                 slice_id: Optional[str] = None, on_ue: bool = False):
        super().__init__(sim, id, node)
        self.fwd = fwd
        self.slice_id = slice_id
        self.on_ue = on_ue

    def add_face(self) -> int:
        return self.fwd.add_face()

    def drop_face(self, face: int) -> None:
        if face in self.fwd.faces:
            self.fwd.remove_face(face)

    def receive(self, face: int, packet) -> None:
        sim = self.sim
        now = sim.now
        trace = sim.trace
        for name in self.fwd.expire_pit(now):
            trace.emit(now, self.id, "pit_expire", name=str(name))
        if isinstance(packet, Interest):
            actions = self.fwd.on_interest(face, packet, now)
        else:
            actions = self.fwd.on_data(face, packet, now)
        for action in actions:
            if isinstance(action, SendInterest):
                hint = action.interest.forwarding_hint
                trace.emit(now, self.id, "interest_fwd", face=action.face, name=str(action.interest.name),
                           hint=str(hint) if hint is not None else None, slice=self.slice_id)
                sim.send(self, action.face, action.interest)
            elif isinstance(action, SendData):
                if action.from_cache:
                    trace.emit(now, self.id, "cache_hit", face=action.face, name=str(action.data.name))
                trace.emit(now, self.id, "data_fwd", face=action.face, name=str(action.data.name))
                sim.send(self, action.face, action.data)
            elif isinstance(action, Drop):
                trace.emit(now, self.id, "drop", reason=action.reason.value, name=str(action.name))
            elif isinstance(action, InvokeResolution):
                sim.mobility.request_resolution(self, action.face, action.interest)
            elif isinstance(action, Aggregated):
                trace.emit(now, self.id, "aggregate", face=action.face, name=str(action.name))
            elif isinstance(action, Redirected):
                trace.emit(now, self.id, "redirect", name=str(action.name), locator=str(action.new_locator))


class AppEndpoint(Endpoint):
    """An application or service function with one or more faces."""

    def __init__(self, sim: Simulation, id: str, node: Optional[str]):
        super().__init__(sim, id, node)
        self.faces: list[int] = []
        self._next_face = 1

    def add_face(self) -> int:
        face = self._next_face
        self._next_face += 1
        self.faces.append(face)
        return face

    def drop_face(self, face: int) -> None:
        if face in self.faces:
            self.faces.remove(face)

    def send(self, packet, face: Optional[int] = None) -> None:
        if face is None:
            if not self.faces:
                self.sim.trace.emit(self.sim.now, self.id, "channel_drop", name=str(packet.name))
                return
            face = self.faces[0]
        self.sim.send(self, face, packet)
