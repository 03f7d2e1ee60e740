"""Declarative scenario description and its JSON form."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any

from ..protocol import Mode

ACTIONS = ("join", "resolve", "change_mac", "attack", "renew")
STRATEGIES = ("SpoofMapping", "RaceOldMac", "DosFloodCentral", "DosVictim")
CENTRAL = "central"

CONFIG_DEFAULTS: dict[str, Any] = {
    # Central Server
    "n_probes": 50,
    "check_timeout": 100,
    "rate_limit": 10,
    "rate_window": 1000,
    # hosts
    "resolve_timeout": 20,
    "retry_timeout": 200,
    "max_retries": 20,
    # DHCP
    "pool_size": 50,
    "ip_send_timeout": 10,
    "ip_send_retries": 5,
    # link
    "hop_delay": 1,
    "p_drop": 0.0,
}


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Step:
    at: int
    do: str
    node: str
    target: str | None = None
    new_mac: str | None = None
    jitter: int = 0
    strategy: str | None = None
    victim: str | None = None
    targets: tuple[str, ...] = ()
    interval: int = 1
    count: int = 1000
    p_drop: float = 0.9

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Step:
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown step fields: {sorted(unknown)}")
        if "at" not in d or "do" not in d or "node" not in d:
            raise ValidationError(f"step needs 'at', 'do' and 'node': {d}")
        d = dict(d)
        if "targets" in d:
            d["targets"] = tuple(d["targets"])
        return cls(**d)

    def to_dict(self) -> dict[str, Any]:
        out = {"at": self.at, "do": self.do, "node": self.node}
        defaults = Step(0, "", "")
        for k, v in asdict(self).items():
            if k not in out and v != getattr(defaults, k):
                out[k] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class Expectation:
    count: int | None = None
    verdict: str | None = None
    confirmed: tuple[str, ...] = ()
    rate_limited: tuple[str, ...] = ()
    detection_p: float | None = None
    detection_n: int | None = None
    tolerance: float = 0.005

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Expectation:
        d = dict(d)
        for k in ("confirmed", "rate_limited"):
            if k in d:
                d[k] = tuple(d[k])
        try:
            return cls(**d)
        except TypeError as exc:
            raise ValidationError(f"bad expectation: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()
                if v not in (None, ())}

    @property
    def expected_detection(self) -> float | None:
        if self.detection_p is None or self.detection_n is None:
            return None
        return 1.0 - (1.0 - self.detection_p) ** self.detection_n


@dataclass(frozen=True)
class Scenario:
    name: str
    mode: Mode = Mode.SECURE
    hosts: tuple[str, ...] = ()
    attackers: tuple[str, ...] = ()
    script: tuple[Step, ...] = ()
    seed: int = 0
    repeat: int = 1
    config: dict[str, Any] = field(default_factory=dict)
    measure: str | None = None
    expect: Expectation = field(default_factory=Expectation)
    max_time: int = 100_000
    description: str = ""

    def cfg(self, key: str) -> Any:
        return self.config.get(key, CONFIG_DEFAULTS[key])

    def with_overrides(self, **kwargs: Any) -> Scenario:
        return replace(self, **{k: v for k, v in kwargs.items() if v is not None})

    def validate(self) -> Scenario:
        names = set(self.hosts) | set(self.attackers)
        if len(names) != len(self.hosts) + len(self.attackers) or CENTRAL in names:
            raise ValidationError("node names must be unique and not 'central'")
        unknown_cfg = set(self.config) - set(CONFIG_DEFAULTS)
        if unknown_cfg:
            raise ValidationError(f"unknown config keys: {sorted(unknown_cfg)}")
        if self.repeat < 1:
            raise ValidationError("repeat must be at least 1")
        if self.cfg("pool_size") < 1:
            raise ValidationError("pool_size must be at least 1")
        last = None
        for step in self.script:
            if not isinstance(step.at, int) or not isinstance(step.jitter, int):
                raise ValidationError(f"step times must be integers: {step}")
            if step.do not in ACTIONS:
                raise ValidationError(f"unknown action {step.do!r}")
            if last is not None and step.at < last:
                raise ValidationError("script times must be nondecreasing")
            last = step.at
            if step.jitter < 0:
                raise ValidationError("jitter must be non-negative")
            pool = self.attackers if step.do == "attack" else self.hosts
            if step.node not in pool:
                raise ValidationError(f"step {step.do!r} references unknown node {step.node!r}")
            if step.do == "resolve" and step.target not in self.hosts:
                raise ValidationError(f"resolve target {step.target!r} is not a host")
            if step.do == "attack":
                self._validate_attack(step)
        return self

    def _validate_attack(self, step: Step) -> None:
        if step.strategy not in STRATEGIES:
            raise ValidationError(f"unknown strategy {step.strategy!r}")
        if step.victim not in self.hosts:
            raise ValidationError(f"attack victim {step.victim!r} is not a host")
        for t in step.targets:
            if t != CENTRAL and t not in self.hosts:
                raise ValidationError(f"attack target {t!r} unknown")
        needs_central = step.strategy in ("RaceOldMac", "DosFloodCentral") or CENTRAL in step.targets
        if needs_central and self.mode != Mode.SECURE:
            raise ValidationError(f"{step.strategy} needs a Central Server (secure mode)")

    # -- JSON --

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> Scenario:
        if "name" not in d:
            raise ValidationError("scenario needs a name")
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown scenario fields: {sorted(unknown)}")
        try:
            mode = Mode(d.get("mode", "secure"))
        except ValueError:
            raise ValidationError(f"unknown mode {d.get('mode')!r}") from None
        scenario = cls(
            name=d["name"],
            mode=mode,
            hosts=tuple(d.get("hosts", ())),
            attackers=tuple(d.get("attackers", ())),
            script=tuple(Step.from_dict(s) for s in d.get("script", ())),
            seed=int(d.get("seed", 0)),
            repeat=int(d.get("repeat", 1)),
            config=dict(d.get("config", {})),
            measure=d.get("measure"),
            expect=Expectation.from_dict(d.get("expect", {})),
            max_time=int(d.get("max_time", 100_000)),
            description=d.get("description", ""),
        )
        return scenario.validate()

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "mode": self.mode.value,
            "description": self.description,
            "hosts": list(self.hosts),
            "attackers": list(self.attackers),
            "script": [s.to_dict() for s in self.script],
            "seed": self.seed,
            "repeat": self.repeat,
            "config": dict(self.config),
            "measure": self.measure,
            "expect": self.expect.to_dict(),
            "max_time": self.max_time,
        }


def load_scenario(path: str | Path) -> Scenario:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: top level must be an object")
    return Scenario.from_dict(data)
