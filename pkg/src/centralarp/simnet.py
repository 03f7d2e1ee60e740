"""Deterministic discrete-event model of one switched layer-2 segment.

Delivery is by destination MAC lookup (the steady state of a learning
switch).  Broadcasts go to every other node.  Time is integer ticks and
one seeded :class:`random.Random` is consumed strictly in event order,
so a (scenario, seed) pair always yields the same trace.

Every send is tagged with the *episode* active when it was made.  Events
inherit the episode of whatever scheduled them, so all frames caused by
e.g. a join are attributed to that join without the nodes cooperating.
"""

from __future__ import annotations

import heapq
import logging
import random
from dataclasses import dataclass
from typing import Any, Callable, NamedTuple, Protocol

from .wire import BROADCAST, MacAddr, peek_kind

log = logging.getLogger(__name__)

NodeId = int


class SimError(Exception):
    pass


class DuplicateMac(SimError):
    pass


class TimeLimitExceeded(SimError):
    pass


class Node(Protocol):
    def on_frame(self, sim: Simulation, data: bytes) -> None: ...


@dataclass(frozen=True)
class DeliveryPolicy:
    p_drop: float = 0.0
    delay: int = 1

    def __post_init__(self):
        if not 0.0 <= self.p_drop <= 1.0:
            raise ValueError("p_drop must lie in [0, 1]")
        if self.delay < 0:
            raise ValueError("delay must be non-negative")


DEFAULT_POLICY = DeliveryPolicy()


class TraceEntry(NamedTuple):
    time: int
    send_id: int
    src: NodeId
    dest: MacAddr
    recipient: NodeId | None
    kind: str
    delivered: bool
    episode: str
    fingerprint: str

    def to_line(self) -> str:
        to = "-" if self.recipient is None else str(self.recipient)
        disposition = "delivered" if self.delivered else "dropped"
        return (
            f"{self.time}\t{self.src}\t{self.dest}\t{to}\t{self.kind}\t"
            f"{disposition}\t{self.episode}\t#{self.send_id}\t{self.fingerprint}"
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "time": self.time,
            "send_id": self.send_id,
            "src": self.src,
            "dest": str(self.dest),
            "recipient": self.recipient,
            "kind": self.kind,
            "disposition": "delivered" if self.delivered else "dropped",
            "episode": self.episode,
            "fingerprint": self.fingerprint,
        }


class Simulation:
    def __init__(self, seed: int = 0, default_policy: DeliveryPolicy = DEFAULT_POLICY):
        self.rng = random.Random(seed)
        self.now = 0
        self.default_policy = default_policy
        self.trace: list[TraceEntry] = []
        self.episode = ""
        self._queue: list[tuple[int, int, str, Callable[[], None]]] = []
        self._seq = 0
        self._send_id = 0
        self._nodes: dict[NodeId, Node] = {}
        self._node_mac: dict[NodeId, MacAddr] = {}
        self._mac_owner: dict[MacAddr, NodeId] = {}
        self._policies: dict[NodeId, DeliveryPolicy] = {}
        self._release_watchers: dict[MacAddr, list[Callable[[MacAddr], None]]] = {}
        self._mac_cache: dict[bytes, MacAddr] = {}

    # -- topology --

    def register_node(self, mac: MacAddr, node: Node) -> NodeId:
        if mac.is_broadcast:
            raise ValueError("a node cannot own the broadcast address")
        if mac in self._mac_owner:
            raise DuplicateMac(f"{mac} is already bound")
        node_id = len(self._nodes)
        self._nodes[node_id] = node
        self._bind(node_id, mac)
        return node_id

    def rebind_mac(self, node_id: NodeId, new_mac: MacAddr) -> MacAddr:
        """Move ``node_id`` to ``new_mac``; returns the MAC it vacated."""
        if new_mac.is_broadcast:
            raise ValueError("a node cannot own the broadcast address")
        owner = self._mac_owner.get(new_mac)
        if owner is not None and owner != node_id:
            raise DuplicateMac(f"{new_mac} is already bound")
        old = self._node_mac[node_id]
        del self._mac_owner[old]
        self._bind(node_id, new_mac)
        for watcher in self._release_watchers.pop(old, []):
            watcher(old)
        return old

    def _bind(self, node_id: NodeId, mac: MacAddr) -> None:
        self._node_mac[node_id] = mac
        self._mac_owner[mac] = node_id

    def watch_release(self, mac: MacAddr, callback: Callable[[MacAddr], None]) -> None:
        """Call ``callback(mac)`` once, as soon as ``mac`` stops being bound."""
        if mac not in self._mac_owner:
            callback(mac)
        else:
            self._release_watchers.setdefault(mac, []).append(callback)

    def mac_of(self, node_id: NodeId) -> MacAddr:
        return self._node_mac[node_id]

    def owner_of(self, mac: MacAddr) -> NodeId | None:
        return self._mac_owner.get(mac)

    def node(self, node_id: NodeId) -> Node:
        return self._nodes[node_id]

    def set_policy(self, node_id: NodeId, policy: DeliveryPolicy) -> None:
        """Delivery policy applied to frames addressed *to* ``node_id``."""
        self._policies[node_id] = policy

    def policy_for(self, node_id: NodeId) -> DeliveryPolicy:
        return self._policies.get(node_id, self.default_policy)

    # -- events --

    def schedule(self, delay: int, action: Callable[[], None], episode: str | None = None) -> None:
        if delay < 0:
            raise ValueError("cannot schedule into the past")
        self._push(self.now + delay, self.episode if episode is None else episode, action)

    def _push(self, time: int, episode: str, action: Callable[[], None]) -> None:
        heapq.heappush(self._queue, (time, self._seq, episode, action))
        self._seq += 1

    def send(self, from_id: NodeId, data: bytes, copies: int = 1) -> None:
        """Transmit ``data``; ``copies`` > 1 sends that many identical frames back to back."""
        data = bytes(data)
        dest = self._dest_of(data)
        kind = peek_kind(data)
        fingerprint = data[-4:].hex()
        episode = self.episode
        now = self.now
        trace = self.trace

        if dest is BROADCAST:
            recipients = [n for n in self._nodes if n != from_id]
        else:
            owner = self._mac_owner.get(dest)
            recipients = [] if owner is None else [owner]
        policies = [(rid, self.policy_for(rid)) for rid in recipients]

        for _ in range(copies):
            send_id = self._send_id
            self._send_id += 1
            if not recipients:
                trace.append(TraceEntry(now, send_id, from_id, dest, None, kind, False, episode, fingerprint))
                continue
            for rid, policy in policies:
                dropped = policy.p_drop > 0.0 and self.rng.random() < policy.p_drop
                trace.append(TraceEntry(now, send_id, from_id, dest, rid, kind, not dropped, episode, fingerprint))
                if not dropped:
                    self._push(now + policy.delay, episode, self._deliverer(rid, dest, data))

    def _dest_of(self, data: bytes) -> MacAddr:
        octets = data[:6]
        mac = self._mac_cache.get(octets)
        if mac is None:
            if len(octets) < 6 or octets == BROADCAST.octets:
                mac = BROADCAST
            else:
                mac = MacAddr(octets)
            self._mac_cache[octets] = mac
        return mac

    def _deliverer(self, rid: NodeId, dest: MacAddr, data: bytes) -> Callable[[], None]:
        def deliver():
            # the recipient may have moved off ``dest`` while the frame was in flight
            if dest is not BROADCAST and self._mac_owner.get(dest) != rid:
                log.debug("t=%d frame for %s arrived after rebind; lost", self.now, dest)
                return
            self._nodes[rid].on_frame(self, data)

        return deliver

    def run_until_quiescent(self, max_time: int = 100_000) -> int:
        while self._queue:
            time = self._queue[0][0]
            if time > max_time:
                raise TimeLimitExceeded(
                    f"events still pending at t={time} beyond max_time={max_time}"
                )
            _, _, episode, action = heapq.heappop(self._queue)
            self.now = time
            self.episode = episode
            action()
        self.episode = ""
        return self.now

    @property
    def pending_events(self) -> int:
        return len(self._queue)

    def messages_sent(self) -> int:
        return self._send_id
