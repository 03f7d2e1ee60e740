"""Adversary node and its strategies.

``SpoofMapping`` is the classic forged reply; ``RaceOldMac`` takes over a
MAC another host just vacated and answers the Central Server's probes
with it; ``DosFloodCentral`` floods forged replies to trip the rate
limiter; ``DosVictim`` degrades delivery toward one host so it misses
probes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..simnet import DeliveryPolicy, NodeId
from ..wire import ZERO_IP, ArpCheck, ArpOp, Frame, IPv4Address, MacAddr, StdArp
from .base import Station


@dataclass(frozen=True)
class SpoofMapping:
    victim_ip: IPv4Address
    targets: tuple[MacAddr, ...]
    # MAC to claim for victim_ip; defaults to the attacker's own
    claimed_mac: MacAddr | None = None


@dataclass(frozen=True)
class RaceOldMac:
    victim_old_mac: MacAddr
    victim_ip: IPv4Address


@dataclass(frozen=True)
class DosFloodCentral:
    central_mac: MacAddr
    claim_ip: IPv4Address
    interval: int = 1
    count: int = 1000


@dataclass(frozen=True)
class DosVictim:
    victim: NodeId
    p_drop: float = 0.9


AttackerStrategy = Union[SpoofMapping, RaceOldMac, DosFloodCentral, DosVictim]


@dataclass
class _RaceState:
    strategy: RaceOldMac
    bound: bool = False
    probes_answered: int = 0


class Attacker(Station):
    def __init__(self, name: str, mac: MacAddr):
        super().__init__(name, mac)
        self.own_mac = mac
        self.received: list[str] = []
        self._race: _RaceState | None = None

    def act(self, strategy: AttackerStrategy) -> None:
        self.record("attack", strategy=type(strategy).__name__)
        if isinstance(strategy, SpoofMapping):
            claimed = strategy.claimed_mac or self.own_mac
            for target in strategy.targets:
                forged = StdArp(ArpOp.REPLY, claimed, strategy.victim_ip, target, ZERO_IP)
                self.send(Frame(target, self.mac, forged))
        elif isinstance(strategy, RaceOldMac):
            self._race = _RaceState(strategy)
            self.sim.watch_release(strategy.victim_old_mac, self._take_mac)
        elif isinstance(strategy, DosFloodCentral):
            self._flood(strategy, strategy.count)
        elif isinstance(strategy, DosVictim):
            self.sim.set_policy(strategy.victim, DeliveryPolicy(p_drop=strategy.p_drop))
        else:
            raise TypeError(f"unknown strategy {strategy!r}")

    def _flood(self, strategy: DosFloodCentral, remaining: int) -> None:
        if remaining <= 0:
            return
        forged = StdArp(ArpOp.REPLY, self.own_mac, strategy.claim_ip, strategy.central_mac, ZERO_IP)
        self.send(Frame(strategy.central_mac, self.mac, forged))
        self.sim.schedule(strategy.interval, lambda: self._flood(strategy, remaining - 1))

    def _take_mac(self, mac: MacAddr) -> None:
        self.sim.rebind_mac(self.node_id, mac)
        self.mac = mac
        self._race.bound = True
        self.record("mac_taken", mac=str(mac))

    def handle(self, frame: Frame) -> None:
        self.received.append(frame.kind)
        race = self._race
        if race is None or not isinstance(frame.body, ArpCheck):
            return
        if frame.body.ip != race.strategy.victim_ip or frame.dest != race.strategy.victim_old_mac:
            return
        race.probes_answered += 1
        reply = StdArp(ArpOp.REPLY, self.mac, race.strategy.victim_ip, frame.src, ZERO_IP)
        self.send(Frame(frame.src, self.mac, reply))
