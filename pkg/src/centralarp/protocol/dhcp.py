from __future__ import annotations

from dataclasses import dataclass

from ..crypto import AuthMaterial
from ..wire import (
    ZERO_MAC,
    DhcpMessage,
    DhcpOp,
    Frame,
    IpReply,
    IpSend,
    IPv4Address,
    MacAddr,
)
from .base import Mode, Station, keyed, tag_ok


@dataclass(frozen=True)
class DhcpConfig:
    ip_send_timeout: int = 10
    ip_send_retries: int = 5


class DhcpServer(Station):
    """Standard four-message DHCP, plus the IP_send notification in secure mode."""

    def __init__(
        self,
        name: str,
        mac: MacAddr,
        ip: IPv4Address,
        pool: list[IPv4Address],
        mode: Mode,
        auth: AuthMaterial | None = None,
        central_mac: MacAddr | None = None,
        config: DhcpConfig = DhcpConfig(),
    ):
        super().__init__(name, mac)
        if mode == Mode.SECURE and (auth is None or central_mac is None):
            raise ValueError("secure mode needs auth material and the Central Server MAC")
        self.ip = ip
        self.pool = list(pool)
        self.mode = mode
        self.auth = auth
        self.central_mac = central_mac if mode == Mode.SECURE else None
        self.config = config
        self.leases: dict[IPv4Address, MacAddr] = {}
        self.lease_log: list[tuple[int, IPv4Address, MacAddr]] = []
        self._offers: dict[MacAddr, IPv4Address] = {}
        # ip -> (mac, attempts) awaiting IP_reply
        self.unacked: dict[IPv4Address, tuple[MacAddr, int]] = {}

    def handle(self, frame: Frame) -> None:
        body = frame.body
        if isinstance(body, DhcpMessage):
            if body.op == DhcpOp.DISCOVER:
                self.on_discover(body)
            elif body.op == DhcpOp.REQUEST:
                self.on_request(body)
        elif isinstance(body, IpReply) and frame.dest == self.mac:
            self.on_ip_reply(frame)

    def lease_of(self, mac: MacAddr) -> IPv4Address | None:
        for ip, holder in self.leases.items():
            if holder == mac:
                return ip
        return None

    def _free_ip(self, client: MacAddr) -> IPv4Address | None:
        held = self.lease_of(client) or self._offers.get(client)
        if held is not None:
            return held
        taken = set(self.leases) | {ip for mac, ip in self._offers.items() if mac != client}
        return next((ip for ip in self.pool if ip not in taken), None)

    def on_discover(self, msg: DhcpMessage) -> None:
        ip = self._free_ip(msg.client_mac)
        if ip is None:
            self.record("pool_exhausted", client=str(msg.client_mac))
            return
        self._offers[msg.client_mac] = ip
        offer = DhcpMessage(DhcpOp.OFFER, msg.xid, msg.client_mac, ip, self.central_mac or ZERO_MAC)
        self.send(Frame(msg.client_mac, self.mac, offer))

    def on_request(self, msg: DhcpMessage) -> None:
        client, ip = msg.client_mac, msg.your_ip
        renewal = self.leases.get(ip) == client
        if not renewal and self._offers.get(client) != ip:
            self.record("request_ignored", client=str(client), ip=str(ip))
            return
        self._offers.pop(client, None)
        self.leases[ip] = client
        self.lease_log.append((self.now, ip, client))
        ack = DhcpMessage(DhcpOp.ACK, msg.xid, client, ip, self.central_mac or ZERO_MAC)
        self.send(Frame(client, self.mac, ack))
        if renewal:
            # renewal leaves the binding untouched, so Central needs no news
            self.record("lease_renewed", ip=str(ip))
            return
        self.record("leased", ip=str(ip), mac=str(client))
        if self.mode == Mode.SECURE:
            self.unacked[ip] = (client, 0)
            self.send_ip_send(ip, client)

    def send_ip_send(self, ip: IPv4Address, mac: MacAddr) -> None:
        entry = self.unacked.get(ip)
        if entry is None or entry[0] != mac:
            return
        attempts = entry[1] + 1
        if attempts > 1 + self.config.ip_send_retries:
            self.record("ip_send_abandoned", ip=str(ip))
            del self.unacked[ip]
            return
        if attempts > 1:
            self.record("ip_send_retransmit", ip=str(ip), attempt=attempts)
        self.unacked[ip] = (mac, attempts)
        self.send(keyed(self.central_mac, self.mac, IpSend(ip, mac), self.auth))
        self.sim.schedule(self.config.ip_send_timeout, lambda: self._ip_send_timer(ip, mac, attempts))

    def _ip_send_timer(self, ip: IPv4Address, mac: MacAddr, attempts: int) -> None:
        entry = self.unacked.get(ip)
        if entry == (mac, attempts):
            self.send_ip_send(ip, mac)

    def on_ip_reply(self, frame: Frame) -> None:
        body = frame.body
        if not tag_ok(frame, self.auth):
            self.record("bad_tag", ip=str(body.ip))
            return
        entry = self.unacked.get(body.ip)
        if body.ack and entry is not None and entry[0] == body.mac:
            del self.unacked[body.ip]
            self.record("ip_reply_ok", ip=str(body.ip))

