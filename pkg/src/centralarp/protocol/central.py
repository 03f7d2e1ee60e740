"""The Central Server: authoritative IP-MAC table and MAC-change verification."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from ..crypto import AuthMaterial
from ..wire import (
    ArpAck,
    ArpCheck,
    ArpNoChange,
    ArpOp,
    Frame,
    IpReply,
    IpSend,
    IPv4Address,
    MacAddr,
    SignedArpReply,
    StdArp,
    encode_frame,
)
from .base import Station, ip_str, keyed, signed, tag_ok


@dataclass(frozen=True)
class CentralConfig:
    n_probes: int = 50
    check_timeout: int = 100
    rate_limit: int = 10
    rate_window: int = 1000

    def validate(self, hop_delay: int = 1) -> None:
        if self.n_probes < 1:
            raise ValueError("n_probes must be at least 1")
        if self.check_timeout <= 2 * hop_delay:
            raise ValueError("check_timeout must exceed a probe round trip")
        if self.rate_limit < 1 or self.rate_window < 1:
            raise ValueError("rate limit and window must be positive")


@dataclass(frozen=True)
class TableChange:
    time: int
    ip: IPv4Address
    mac: MacAddr
    previous: MacAddr | None
    reason: str


class IpMacTable:
    """IP -> MAC bindings with a full change history."""

    def __init__(self):
        self._entries: dict[IPv4Address, MacAddr] = {}
        self.history: list[TableChange] = []
        self.observers: list[Callable[[TableChange], None]] = []

    def get(self, ip: IPv4Address) -> MacAddr | None:
        return self._entries.get(ip)

    def set(self, ip: IPv4Address, mac: MacAddr, time: int, reason: str) -> None:
        previous = self._entries.get(ip)
        if previous == mac:
            return
        self._entries[ip] = mac
        change = TableChange(time, ip, mac, previous, reason)
        self.history.append(change)
        for observer in self.observers:
            observer(change)

    def __contains__(self, ip: IPv4Address) -> bool:
        return ip in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def snapshot(self) -> dict[str, str]:
        return {str(ip): str(mac) for ip, mac in sorted(self._entries.items())}

    def ever_mapped(self, ip: IPv4Address, mac: MacAddr) -> bool:
        return any(c.ip == ip and c.mac == mac for c in self.history)


@dataclass
class PendingCheck:
    ip: IPv4Address
    old_mac: MacAddr
    new_mac: MacAddr
    initiator_mac: MacAddr
    probes_sent: int
    deadline: int
    reply_seen: bool = False


class CentralServer(Station):
    def __init__(
        self,
        name: str,
        mac: MacAddr,
        ip: IPv4Address,
        auth: AuthMaterial,
        config: CentralConfig = CentralConfig(),
    ):
        super().__init__(name, mac)
        config.validate()
        self.ip = ip
        self.auth = auth
        self.config = config
        self.table = IpMacTable()
        self.pending: dict[IPv4Address, PendingCheck] = {}
        self._lingering: dict[tuple[IPv4Address, MacAddr], int] = {}
        self._admitted: deque[int] = deque()

    def handle(self, frame: Frame) -> None:
        body = frame.body
        if isinstance(body, IpSend):
            self.on_ip_send(frame)
        elif isinstance(body, StdArp):
            if body.op == ArpOp.REQUEST:
                self.on_arp_request(frame)
            elif frame.dest == self.mac:
                self.on_arp_reply(frame)

    # -- join path --

    def on_ip_send(self, frame: Frame) -> None:
        body = frame.body
        if frame.dest != self.mac or not tag_ok(frame, self.auth):
            self.record("bad_tag", ip=str(body.ip))
            return
        self.table.set(body.ip, body.mac, self.now, "ip_send")
        self.send(keyed(frame.src, self.mac, IpReply(body.ip, body.mac, ack=True), self.auth))

    # -- resolution --

    def on_arp_request(self, frame: Frame) -> None:
        req = frame.body
        mac = self.table.get(req.target_ip)
        if mac is None:
            self.record("unknown_ip", ip=str(req.target_ip))
            return
        inner = StdArp(ArpOp.REPLY, mac, req.target_ip, req.sender_mac, req.sender_ip)
        self.send(signed(frame.src, self.mac, SignedArpReply(inner), self.auth))

    # -- MAC change verification --

    def on_arp_reply(self, frame: Frame) -> None:
        claim = frame.body
        ip, mac = claim.sender_ip, claim.sender_mac
        pending = self.pending.get(ip)
        if pending is not None and mac == pending.old_mac:
            self.on_check_reply(pending)
            return
        until = self._lingering.get((ip, mac))
        if until is not None:
            if self.now <= until:
                self.record("late_probe_reply", ip=str(ip), mac=str(mac))
                return
            del self._lingering[(ip, mac)]

        if not self._admit():
            self.record("rate_limited", ip=str(ip), mac=str(mac), src=str(frame.src))
            return
        if pending is not None:
            self.record("duplicate_pending", ip=str(ip), mac=str(mac))
            return
        current = self.table.get(ip)
        if current is None:
            self.record("unknown_ip_claim", ip=str(ip), mac=str(mac))
            return
        if current == mac:
            self.record("change_noop", ip=str(ip), mac=str(mac))
            self.send(signed(frame.src, self.mac, ArpAck(ip), self.auth))
            return
        self.start_check(ip, current, mac, frame.src)

    def _admit(self) -> bool:
        horizon = self.now - self.config.rate_window
        while self._admitted and self._admitted[0] <= horizon:
            self._admitted.popleft()
        if len(self._admitted) >= self.config.rate_limit:
            return False
        self._admitted.append(self.now)
        return True

    def start_check(self, ip: IPv4Address, old_mac: MacAddr, new_mac: MacAddr, initiator: MacAddr) -> None:
        check = PendingCheck(
            ip=ip,
            old_mac=old_mac,
            new_mac=new_mac,
            initiator_mac=initiator,
            probes_sent=0,
            deadline=self.now + self.config.check_timeout,
        )
        self.pending[ip] = check
        self.record("check_started", ip=str(ip), old=str(old_mac), new=str(new_mac))
        # Ed25519 is deterministic, so every probe carries identical bytes
        probe = encode_frame(signed(old_mac, self.mac, ArpCheck(ip), self.auth))
        self.sim.send(self.node_id, probe, copies=self.config.n_probes)
        check.probes_sent = self.config.n_probes
        self.sim.schedule(self.config.check_timeout, lambda: self.on_deadline(check))

    def on_check_reply(self, check: PendingCheck) -> None:
        if check.reply_seen:
            return
        check.reply_seen = True
        self.record("change_rejected", ip=str(check.ip), old=str(check.old_mac), new=str(check.new_mac))
        self.send(signed(check.initiator_mac, self.mac, ArpNoChange(check.ip), self.auth))

    def on_deadline(self, check: PendingCheck) -> None:
        if self.pending.get(check.ip) is not check:
            return
        del self.pending[check.ip]
        self._lingering[(check.ip, check.old_mac)] = self.now + self.config.check_timeout
        if check.reply_seen:
            return
        self.table.set(check.ip, check.new_mac, self.now, "check_expired")
        self.record("change_committed", ip=str(check.ip), old=str(check.old_mac), new=str(check.new_mac))
        self.send(signed(check.initiator_mac, self.mac, ArpAck(check.ip), self.auth))

    def describe(self) -> dict:
        return {"name": self.name, "mac": str(self.mac), "ip": ip_str(self.ip), "table": self.table.snapshot()}
