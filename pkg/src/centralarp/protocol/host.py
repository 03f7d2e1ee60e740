from __future__ import annotations

from dataclasses import dataclass

from ..crypto import TrustRoot
from ..wire import (
    BROADCAST,
    ZERO_IP,
    ZERO_MAC,
    ArpAck,
    ArpCheck,
    ArpNoChange,
    ArpOp,
    DhcpMessage,
    DhcpOp,
    Frame,
    IPv4Address,
    MacAddr,
    SignedArpReply,
    StdArp,
)
from .base import Mode, ProtocolError, Station, ip_str, signature_ok


@dataclass(frozen=True)
class HostConfig:
    resolve_timeout: int = 20
    retry_timeout: int = 200
    # None retries forever; only sensible when something else bounds the run
    max_retries: int | None = 20


@dataclass
class PendingChange:
    ip: IPv4Address
    new_mac: MacAddr
    attempts: int = 0


@dataclass(frozen=True)
class CacheChange:
    time: int
    ip: IPv4Address
    mac: MacAddr
    source: str


class Host(Station):
    def __init__(
        self,
        name: str,
        mac: MacAddr,
        mode: Mode,
        trust_root: TrustRoot | None = None,
        config: HostConfig = HostConfig(),
    ):
        super().__init__(name, mac)
        if mode == Mode.SECURE and trust_root is None:
            raise ValueError("secure hosts need the trust root")
        self.mode = mode
        self.trust_root = trust_root
        self.config = config
        self.ip: IPv4Address | None = None
        self.central_mac: MacAddr | None = None
        self.arp_cache: dict[IPv4Address, MacAddr] = {}
        self.cache_log: list[CacheChange] = []
        self.pending_resolutions: dict[IPv4Address, int] = {}
        self.change: PendingChange | None = None
        self._xid = 0
        self._join_xid: int | None = None

    # -- DHCP join --

    def join(self) -> None:
        self._xid += 1
        self._join_xid = (self.node_id << 16) | self._xid
        self.send(Frame(BROADCAST, self.mac, DhcpMessage(DhcpOp.DISCOVER, self._join_xid, self.mac)))

    def renew(self) -> None:
        if self.ip is None:
            raise ProtocolError(f"{self.name} has no lease to renew")
        self._xid += 1
        self._join_xid = (self.node_id << 16) | self._xid
        msg = DhcpMessage(DhcpOp.REQUEST, self._join_xid, self.mac, self.ip)
        self.send(Frame(BROADCAST, self.mac, msg))

    def _on_dhcp(self, msg: DhcpMessage) -> None:
        if msg.client_mac != self.mac or msg.xid != self._join_xid:
            return
        if msg.op == DhcpOp.OFFER:
            request = DhcpMessage(DhcpOp.REQUEST, msg.xid, self.mac, msg.your_ip)
            self.send(Frame(BROADCAST, self.mac, request))
        elif msg.op == DhcpOp.ACK:
            self._join_xid = None
            self.ip = msg.your_ip
            if self.mode == Mode.SECURE:
                self.central_mac = msg.central_mac
            self.record("joined", ip=str(self.ip))

    # -- resolution --

    def resolve(self, target_ip: IPv4Address) -> None:
        if self.ip is None:
            raise ProtocolError(f"{self.name} cannot resolve before joining")
        request = StdArp(ArpOp.REQUEST, self.mac, self.ip, ZERO_MAC, target_ip)
        self.send(Frame(BROADCAST, self.mac, request))
        if self.mode == Mode.SECURE:
            self.pending_resolutions[target_ip] = self.now + self.config.resolve_timeout
            self.sim.schedule(self.config.resolve_timeout, lambda: self._resolve_timeout(target_ip))

    def _resolve_timeout(self, target_ip: IPv4Address) -> None:
        deadline = self.pending_resolutions.get(target_ip)
        if deadline is not None and deadline <= self.now:
            del self.pending_resolutions[target_ip]
            self.record("resolution_timeout", ip=str(target_ip))

    def _cache(self, ip: IPv4Address, mac: MacAddr, source: str) -> None:
        self.arp_cache[ip] = mac
        self.cache_log.append(CacheChange(self.now, ip, mac, source))

    def _on_signed_reply(self, frame: Frame) -> None:
        inner = frame.body.inner
        if not signature_ok(frame, self.trust_root):
            self.record("verification_failed", ip=str(inner.sender_ip))
            return
        if inner.sender_ip not in self.pending_resolutions or inner.target_mac != self.mac:
            self.record("unsolicited_signed_reply", ip=str(inner.sender_ip))
            return
        del self.pending_resolutions[inner.sender_ip]
        self._cache(inner.sender_ip, inner.sender_mac, "signed_reply")
        self.record("resolved", ip=str(inner.sender_ip), mac=str(inner.sender_mac))

    def _on_std_arp(self, frame: Frame) -> None:
        arp = frame.body
        if self.mode == Mode.SECURE:
            # plain ARP is only meaningful to the Central Server
            if arp.op == ArpOp.REPLY:
                self.record("unsigned_reply_ignored", ip=str(arp.sender_ip), mac=str(arp.sender_mac))
            return
        if arp.op == ArpOp.REQUEST:
            if self.ip is not None and arp.target_ip == self.ip:
                reply = StdArp(ArpOp.REPLY, self.mac, self.ip, arp.sender_mac, arp.sender_ip)
                self.send(Frame(arp.sender_mac, self.mac, reply))
            return
        # baseline ARP trusts every reply, solicited or not
        if arp.sender_ip != self.ip:
            self._cache(arp.sender_ip, arp.sender_mac, "arp_reply")

    # -- probes and MAC change --

    def _on_arp_check(self, frame: Frame) -> None:
        if not signature_ok(frame, self.trust_root):
            self.record("verification_failed", probe=True)
            return
        ip = frame.body.ip
        if frame.dest != self.mac or self.ip != ip:
            return
        reply = StdArp(ArpOp.REPLY, self.mac, self.ip, frame.src, ZERO_IP)
        self.send(Frame(frame.src, self.mac, reply))

    def change_mac(self, new_mac: MacAddr) -> MacAddr:
        """Move to ``new_mac`` and announce it; returns the old MAC."""
        old = self.sim.rebind_mac(self.node_id, new_mac)
        self.mac = new_mac
        self.record("mac_changed", old=str(old), new=str(new_mac))
        if self.ip is None:
            return old
        if self.mode == Mode.BASELINE:
            gratuitous = StdArp(ArpOp.REPLY, new_mac, self.ip, BROADCAST, self.ip)
            self.send(Frame(BROADCAST, new_mac, gratuitous))
            return old
        self.change = PendingChange(self.ip, new_mac)
        self._send_change(self.change)
        return old

    def _send_change(self, change: PendingChange) -> None:
        if self.change is not change:
            return
        limit = self.config.max_retries
        if limit is not None and change.attempts > limit:
            self.record("change_abandoned", ip=str(change.ip))
            self.change = None
            return
        if change.attempts:
            self.record("change_retry", ip=str(change.ip), attempt=change.attempts)
        change.attempts += 1
        claim = StdArp(ArpOp.REPLY, change.new_mac, change.ip, self.central_mac, ZERO_IP)
        self.send(Frame(self.central_mac, self.mac, claim))
        self.sim.schedule(self.config.retry_timeout, lambda: self._send_change(change))

    def _on_outcome(self, frame: Frame) -> None:
        if not signature_ok(frame, self.trust_root):
            self.record("verification_failed", outcome=frame.kind)
            return
        change = self.change
        if change is None or frame.body.ip != change.ip or frame.dest != self.mac:
            self.record("outcome_ignored", outcome=frame.kind)
            return
        self.change = None
        if isinstance(frame.body, ArpAck):
            self.record("change_confirmed", ip=str(change.ip), mac=str(change.new_mac))
            return
        self.record("change_rejected", ip=str(change.ip))
        # the old IP stays bound to the old MAC; start over with a fresh lease
        self.ip = None
        self.sim.episode = f"rejoin:{self.name}"
        self.join()

    def handle(self, frame: Frame) -> None:
        body = frame.body
        if isinstance(body, DhcpMessage):
            self._on_dhcp(body)
        elif isinstance(body, StdArp):
            self._on_std_arp(frame)
        elif self.mode == Mode.BASELINE:
            return
        elif isinstance(body, SignedArpReply):
            self._on_signed_reply(frame)
        elif isinstance(body, ArpCheck):
            self._on_arp_check(frame)
        elif isinstance(body, (ArpAck, ArpNoChange)):
            self._on_outcome(frame)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "mac": str(self.mac),
            "ip": ip_str(self.ip),
            "arp_cache": {str(ip): str(mac) for ip, mac in sorted(self.arp_cache.items())},
        }
