from __future__ import annotations

import functools
import hashlib
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Iterable

from ..crypto import AuthMaterial
from ..protocol import (
    Attacker,
    CentralConfig,
    CentralServer,
    DhcpConfig,
    DhcpServer,
    DosFloodCentral,
    DosVictim,
    Host,
    HostConfig,
    Mode,
    RaceOldMac,
    SpoofMapping,
    TableChange,
)
from ..simnet import DeliveryPolicy, Simulation, TraceEntry
from ..wire import IPv4Address, MacAddr
from .model import CENTRAL, Scenario, Step

BLOCKED = "BLOCKED"
BLOCKED_WITH_RECOVERY = "BLOCKED-WITH-RECOVERY"
SUCCEEDED = "SUCCEEDED"
NOT_APPLICABLE = "N/A"

DHCP_MAC = MacAddr.from_int(0x020000000001)
CENTRAL_MAC = MacAddr.from_int(0x020000000002)
DHCP_IP = IPv4Address("10.0.0.1")
CENTRAL_IP = IPv4Address("10.0.0.2")
POOL_START = IPv4Address("10.0.0.10")


def host_mac(index: int) -> MacAddr:
    return MacAddr.from_int(0x020000000100 + index)


def changed_mac(index: int, generation: int = 1) -> MacAddr:
    return MacAddr.from_int(0x0200000C0000 + (generation << 8) + index)


def attacker_mac(index: int) -> MacAddr:
    return MacAddr.from_int(0x020000000E00 + index)


@functools.lru_cache(maxsize=8)
def _pool(size: int) -> tuple[IPv4Address, ...]:
    return tuple(POOL_START + i for i in range(size))


def derive_seed(base: int, counter: int) -> int:
    digest = hashlib.sha256(f"{base}/{counter}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def episode_counts(trace: Iterable[TraceEntry]) -> dict[str, dict[str, Any]]:
    """Messages per episode, counting each transmission once (a broadcast is one message)."""
    seen: dict[str, dict[int, str]] = {}
    for entry in trace:
        seen.setdefault(entry.episode or "(setup)", {})[entry.send_id] = entry.kind
    return {
        episode: {"total": len(sends), "by_kind": dict(sorted(Counter(sends.values()).items()))}
        for episode, sends in sorted(seen.items())
    }


@dataclass
class Report:
    scenario: str
    mode: str
    seed: int
    final_time: int
    episodes: dict[str, dict[str, Any]]
    measured: dict[str, Any] | None
    table: dict[str, str]
    table_history: list[dict[str, Any]]
    nodes: dict[str, dict[str, Any]]
    verdict: str
    forged: list[dict[str, Any]]
    unsound: list[dict[str, Any]]
    monte_carlo: dict[str, Any] | None = None
    trace: list[TraceEntry] = field(default_factory=list, repr=False)

    def to_dict(self, include_trace: bool = False) -> dict[str, Any]:
        out = {
            "scenario": self.scenario,
            "mode": self.mode,
            "seed": self.seed,
            "final_time": self.final_time,
            "messages_total": len({e.send_id for e in self.trace}),
            "episodes": self.episodes,
            "measured": self.measured,
            "table": self.table,
            "table_history": self.table_history,
            "nodes": self.nodes,
            "verdict": self.verdict,
            "forged": self.forged,
            "unsound": self.unsound,
            "monte_carlo": self.monte_carlo,
        }
        if include_trace:
            out["trace"] = [e.to_dict() for e in self.trace]
        return out

    def to_json(self, include_trace: bool = False) -> str:
        return json.dumps(self.to_dict(include_trace), indent=2, sort_keys=True)

    def trace_lines(self) -> str:
        header = "time\tsrc\tdest\trecipient\tkind\tdisposition\tepisode\tsend\tfcs\n"
        return header + "".join(e.to_line() + "\n" for e in self.trace)

    def count(self, episode: str) -> int:
        return self.episodes.get(episode, {}).get("total", 0)


class World:
    """One instantiated scenario: simulation, nodes and ground-truth audit."""

    def __init__(self, scenario: Scenario, seed: int, auth: AuthMaterial | None = None):
        self.scenario = scenario
        self.mode = scenario.mode
        cfg = scenario.cfg
        self.sim = Simulation(
            seed, DeliveryPolicy(p_drop=cfg("p_drop"), delay=cfg("hop_delay"))
        )
        self.auth = auth or AuthMaterial.derive(scenario.seed)
        secure = self.mode == Mode.SECURE

        self.central: CentralServer | None = None
        if secure:
            central_cfg = CentralConfig(
                n_probes=cfg("n_probes"),
                check_timeout=cfg("check_timeout"),
                rate_limit=cfg("rate_limit"),
                rate_window=cfg("rate_window"),
            )
            central_cfg.validate(cfg("hop_delay"))
            self.central = CentralServer(CENTRAL, CENTRAL_MAC, CENTRAL_IP, self.auth, central_cfg)
            self.central.table.observers.append(self._audit)
            self.central.attach(self.sim)

        pool = _pool(cfg("pool_size"))
        self.dhcp = DhcpServer(
            "dhcp",
            DHCP_MAC,
            DHCP_IP,
            pool,
            self.mode,
            auth=self.auth if secure else None,
            central_mac=CENTRAL_MAC if secure else None,
            config=DhcpConfig(cfg("ip_send_timeout"), cfg("ip_send_retries")),
        )
        self.dhcp.attach(self.sim)

        host_cfg = HostConfig(cfg("resolve_timeout"), cfg("retry_timeout"), cfg("max_retries"))
        self.hosts: dict[str, Host] = {}
        for i, name in enumerate(scenario.hosts):
            host = Host(name, host_mac(i), self.mode, self.auth.trust_root if secure else None, host_cfg)
            host.attach(self.sim)
            self.hosts[name] = host
        self.attackers: dict[str, Attacker] = {}
        for i, name in enumerate(scenario.attackers):
            attacker = Attacker(name, attacker_mac(i))
            attacker.attach(self.sim)
            self.attackers[name] = attacker

        self.attacker_macs = {a.own_mac for a in self.attackers.values()}
        self.unsound: list[dict[str, Any]] = []
        self.forged_table: list[TableChange] = []
        self.race_victims: list[str] = []
        self._mac_changes: Counter[str] = Counter()
        self._labels: Counter[str] = Counter()

    # -- ground truth --

    def _audit(self, change: TableChange) -> None:
        owner = self.sim.owner_of(change.mac)
        node = self.sim.node(owner) if owner is not None else None
        if change.mac in self.attacker_macs or isinstance(node, Attacker):
            self.forged_table.append(change)
        if change.reason == "ip_send" and self.dhcp.leases.get(change.ip) != change.mac:
            self.unsound.append(_change_dict(change) | {"why": "not a current DHCP lease"})
        elif change.reason == "check_expired":
            if not isinstance(node, Host) or node.ip != change.ip:
                self.unsound.append(_change_dict(change) | {"why": "installed MAC is not the IP's holder"})

    # -- script --

    def schedule_script(self) -> None:
        for step in self.scenario.script:
            at = step.at + (self.sim.rng.randint(0, step.jitter) if step.jitter else 0)
            label = self._label(step)
            self.sim.schedule(at - self.sim.now, lambda s=step: self.execute(s), episode=label)

    def _label(self, step: Step) -> str:
        if step.do == "resolve":
            base = f"resolve:{step.node}->{step.target}"
        elif step.do == "change_mac":
            base = f"change:{step.node}"
        else:
            base = f"{step.do}:{step.node}"
        self._labels[base] += 1
        n = self._labels[base]
        return base if n == 1 else f"{base}#{n}"

    def execute(self, step: Step) -> None:
        if step.do == "join":
            self.hosts[step.node].join()
        elif step.do == "renew":
            self.hosts[step.node].renew()
        elif step.do == "resolve":
            target = self.hosts[step.target]
            if target.ip is None:
                self.hosts[step.node].record("resolve_skipped", target=step.target)
                return
            self.hosts[step.node].resolve(target.ip)
        elif step.do == "change_mac":
            host = self.hosts[step.node]
            index = self.scenario.hosts.index(step.node)
            self._mac_changes[step.node] += 1
            new = MacAddr.parse(step.new_mac) if step.new_mac else changed_mac(index, self._mac_changes[step.node])
            host.change_mac(new)
        elif step.do == "attack":
            self.attackers[step.node].act(self._strategy(step))

    def _strategy(self, step: Step):
        victim = self.hosts[step.victim]
        if step.strategy == "SpoofMapping":
            targets = tuple(self._mac_of(t) for t in step.targets)
            return SpoofMapping(victim.ip, targets)
        if step.strategy == "RaceOldMac":
            self.race_victims.append(step.victim)
            return RaceOldMac(victim.mac, victim.ip)
        if step.strategy == "DosFloodCentral":
            return DosFloodCentral(CENTRAL_MAC, victim.ip, step.interval, step.count)
        return DosVictim(victim.node_id, step.p_drop)

    def _mac_of(self, name: str) -> MacAddr:
        return CENTRAL_MAC if name == CENTRAL else self.hosts[name].mac

    # -- outcome --

    def forged_mappings(self) -> list[dict[str, Any]]:
        out = [_change_dict(c) | {"where": CENTRAL} for c in self.forged_table]
        for host in self.hosts.values():
            for entry in host.cache_log:
                if entry.mac in self.attacker_macs:
                    out.append(
                        {"time": entry.time, "ip": str(entry.ip), "mac": str(entry.mac), "where": host.name}
                    )
        return out

    def verdict(self) -> str:
        if not self.attackers or not any(s.do == "attack" for s in self.scenario.script):
            return NOT_APPLICABLE
        if self.forged_mappings():
            return SUCCEEDED
        verdicts = [self._race_verdict(self.hosts[v]) for v in self.race_victims]
        if SUCCEEDED in verdicts:
            return SUCCEEDED
        if BLOCKED_WITH_RECOVERY in verdicts:
            return BLOCKED_WITH_RECOVERY
        return BLOCKED

    def _race_verdict(self, victim: Host) -> str:
        if victim.happened("change_confirmed"):
            return BLOCKED
        recovered = (
            victim.happened("change_rejected")
            and victim.ip is not None
            and self.central.table.get(victim.ip) == victim.mac
        )
        return BLOCKED_WITH_RECOVERY if recovered else SUCCEEDED

    def report(self, seed: int, final_time: int) -> Report:
        episodes = episode_counts(self.sim.trace)
        measured = None
        if self.scenario.measure:
            measured = {
                "episode": self.scenario.measure,
                "count": episodes.get(self.scenario.measure, {}).get("total", 0),
            }
        nodes = {}
        for station in [self.central, self.dhcp, *self.hosts.values(), *self.attackers.values()]:
            if station is None:
                continue
            info = {"mac": str(station.mac), "events": dict(sorted(Counter(e.what for e in station.events).items()))}
            if isinstance(station, Host):
                info.update(station.describe())
                if self.central is not None:
                    info["rate_limited"] = sum(
                        1 for e in self.central.happened("rate_limited") if e.detail["mac"] == str(station.mac)
                    )
            elif isinstance(station, DhcpServer):
                info["leases"] = {str(ip): str(mac) for ip, mac in sorted(station.leases.items())}
            nodes[station.name] = info
        table = self.central.table if self.central else None
        return Report(
            scenario=self.scenario.name,
            mode=self.mode.value,
            seed=seed,
            final_time=final_time,
            episodes=episodes,
            measured=measured,
            table=table.snapshot() if table else {},
            table_history=[_change_dict(c) for c in table.history] if table else [],
            nodes=nodes,
            verdict=self.verdict(),
            forged=self.forged_mappings(),
            unsound=self.unsound,
            trace=list(self.sim.trace),
        )


def _change_dict(c: TableChange) -> dict[str, Any]:
    return {
        "time": c.time,
        "ip": str(c.ip),
        "mac": str(c.mac),
        "previous": None if c.previous is None else str(c.previous),
        "reason": c.reason,
    }


def run_world(scenario: Scenario, seed: int | None = None, auth: AuthMaterial | None = None) -> World:
    """Build and run one trial; returns the finished world for inspection."""
    world = World(scenario, scenario.seed if seed is None else seed, auth)
    world.schedule_script()
    world.final_time = world.sim.run_until_quiescent(scenario.max_time)
    return world


def run_once(scenario: Scenario, seed: int | None = None, auth: AuthMaterial | None = None) -> Report:
    seed = scenario.seed if seed is None else seed
    world = run_world(scenario, seed, auth)
    return world.report(seed, world.final_time)


def run_scenario(scenario: Scenario) -> Report:
    scenario.validate()
    if scenario.repeat == 1:
        return run_once(scenario)
    # key material is fixed per batch; trials differ only in the simulation seed
    auth = AuthMaterial.derive(scenario.seed)
    first = None
    verdicts: Counter[str] = Counter()
    for i in range(scenario.repeat):
        world = run_world(scenario, derive_seed(scenario.seed, i), auth)
        verdicts[world.verdict()] += 1
        if first is None:
            first = world.report(derive_seed(scenario.seed, i), world.final_time)
    trials = scenario.repeat
    successes = trials - verdicts[SUCCEEDED]
    estimate = successes / trials
    first.monte_carlo = {
        "trials": trials,
        "successes": successes,
        "estimate": estimate,
        "stderr": math.sqrt(estimate * (1 - estimate) / trials),
        "verdicts": dict(sorted(verdicts.items())),
        "expected": scenario.expect.expected_detection,
    }
    return first
