from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from typing import Any

from ..crypto import AuthMaterial, sign, tag_message, verify, verify_tag
from ..simnet import NodeId, Simulation
from ..wire import (
    AuthSection,
    DecodeError,
    Frame,
    IPv4Address,
    MacAddr,
    decode_cached,
    encode_frame,
    signed_bytes,
    signed_portion,
)

log = logging.getLogger("centralarp.protocol")


class Mode(str, enum.Enum):
    SECURE = "secure"
    BASELINE = "baseline"


class ProtocolError(Exception):
    pass


@dataclass(frozen=True)
class Event:
    time: int
    what: str
    detail: dict[str, Any] = field(default_factory=dict)


class Station:
    """A node on the simulated link: owns a MAC, decodes inbound frames."""

    def __init__(self, name: str, mac: MacAddr):
        self.name = name
        self.mac = mac
        self.sim: Simulation | None = None
        self.node_id: NodeId = -1
        self.events: list[Event] = []

    def attach(self, sim: Simulation) -> NodeId:
        self.sim = sim
        self.node_id = sim.register_node(self.mac, self)
        return self.node_id

    @property
    def now(self) -> int:
        return self.sim.now if self.sim else 0

    def record(self, what: str, **detail: Any) -> None:
        self.events.append(Event(self.now, what, detail))
        log.debug("t=%d %s %s %s", self.now, self.name, what, detail)

    def happened(self, what: str) -> list[Event]:
        return [e for e in self.events if e.what == what]

    def send(self, frame: Frame) -> None:
        self.sim.send(self.node_id, encode_frame(frame))

    def on_frame(self, sim: Simulation, data: bytes) -> None:
        try:
            frame = decode_cached(data)
        except DecodeError as exc:
            self.record("decode_error", error=str(exc))
            return
        self.handle(frame)

    def handle(self, frame: Frame) -> None:
        raise NotImplementedError


def keyed(dest: MacAddr, src: MacAddr, body, auth: AuthMaterial) -> Frame:
    tag = tag_message(auth.shared_key, signed_bytes(dest, src, body))
    return Frame(dest, src, body, AuthSection.keyed(tag))


def tag_ok(frame: Frame, auth: AuthMaterial) -> bool:
    return verify_tag(auth.shared_key, signed_portion(frame), frame.auth.tag)


def signed(dest: MacAddr, src: MacAddr, body, auth: AuthMaterial) -> Frame:
    sig = sign(auth.central_keys, signed_bytes(dest, src, body))
    return Frame(dest, src, body, AuthSection.signed(sig, auth.central_cert.to_bytes()))


def signature_ok(frame: Frame, trust_root) -> bool:
    return verify(frame.auth.cert, signed_portion(frame), frame.auth.signature, trust_root)


def ip_str(ip: IPv4Address | None) -> str | None:
    return None if ip is None else str(ip)
