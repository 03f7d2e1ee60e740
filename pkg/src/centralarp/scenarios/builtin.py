from __future__ import annotations

from dataclasses import replace

from ..protocol import Mode
from .model import Expectation, Scenario, Step, ValidationError

SECURE, BASELINE = Mode.SECURE, Mode.BASELINE

ALIASES = {"mac-change": "mac-change-clean"}


def _join_steps(*hosts: str, spacing: int = 20) -> list[Step]:
    return [Step(i * spacing, "join", h) for i, h in enumerate(hosts)]


def _pair(scenario: Scenario, baseline_count: int, **baseline_changes) -> list[Scenario]:
    baseline = replace(
        scenario,
        mode=BASELINE,
        expect=replace(scenario.expect, count=baseline_count),
        **baseline_changes,
    )
    return [scenario, baseline]


def builtin_scenarios() -> list[Scenario]:
    join = Scenario(
        name="join",
        description="one host obtains a lease",
        hosts=("A",),
        script=tuple(_join_steps("A")),
        measure="join:A",
        expect=Expectation(count=6),
    )
    resolve = Scenario(
        name="resolve",
        description="A resolves B's MAC after both joined",
        hosts=("A", "B"),
        script=(*_join_steps("A", "B"), Step(40, "resolve", "A", target="B")),
        measure="resolve:A->B",
        expect=Expectation(count=2),
    )
    mac_change = Scenario(
        name="mac-change-clean",
        description="B changes its MAC with its old MAC gone from the link",
        hosts=("A", "B"),
        script=(
            *_join_steps("A", "B"),
            Step(40, "resolve", "A", target="B"),
            Step(60, "change_mac", "B"),
        ),
        measure="change:B",
        expect=Expectation(count=52),
    )
    type1_steps = (
        *_join_steps("A", "B"),
        Step(40, "resolve", "A", target="B"),
        Step(100, "attack", "X", jitter=200, strategy="SpoofMapping", victim="B", targets=("central", "A")),
    )
    attack_type1 = Scenario(
        name="attack-type1",
        description="X forges an ARP reply claiming B's IP while B is online",
        hosts=("A", "B"),
        attackers=("X",),
        script=type1_steps,
        expect=Expectation(verdict="BLOCKED"),
    )
    attack_type1_baseline = replace(
        attack_type1,
        mode=BASELINE,
        script=(*type1_steps[:-1], replace(type1_steps[-1], targets=("A",))),
        expect=Expectation(verdict="SUCCEEDED"),
    )
    attack_type2 = Scenario(
        name="attack-type2",
        description="B changes MAC; X grabs B's old MAC and answers the probes",
        hosts=("A", "B"),
        attackers=("X",),
        script=(
            *_join_steps("A", "B"),
            Step(40, "attack", "X", strategy="RaceOldMac", victim="B"),
            Step(60, "change_mac", "B", jitter=100),
        ),
        expect=Expectation(verdict="BLOCKED-WITH-RECOVERY"),
    )
    dos_central = Scenario(
        name="dos-central",
        description="X floods the Central Server while C genuinely changes MAC",
        hosts=("A", "B", "C"),
        attackers=("X",),
        script=(
            *_join_steps("A", "B", "C"),
            Step(100, "attack", "X", strategy="DosFloodCentral", victim="B", interval=1, count=1000),
            Step(300, "change_mac", "C", jitter=200),
        ),
        expect=Expectation(verdict="BLOCKED", confirmed=("C",), rate_limited=("C",)),
    )
    dos_victim = Scenario(
        name="dos-victim-montecarlo",
        description="B is DOSed (90% loss) while X spoofs B's IP at the Central Server",
        hosts=("B",),
        attackers=("X",),
        script=(
            *_join_steps("B"),
            Step(50, "attack", "X", strategy="DosVictim", victim="B", p_drop=0.9),
            Step(60, "attack", "X", strategy="SpoofMapping", victim="B", targets=("central",)),
        ),
        repeat=10_000,
        expect=Expectation(detection_p=0.1, detection_n=50, tolerance=0.005),
    )
    return [
        *_pair(join, 4),
        *_pair(resolve, 2),
        *_pair(mac_change, 1),
        attack_type1,
        attack_type1_baseline,
        attack_type2,
        dos_central,
        dos_victim,
    ]


def builtin_names() -> list[str]:
    return sorted({s.name for s in builtin_scenarios()})


def get_builtin(name: str, mode: Mode | str | None = None) -> Scenario:
    name = ALIASES.get(name, name)
    mode = Mode(mode) if mode is not None else None
    matches = [s for s in builtin_scenarios() if s.name == name]
    if not matches:
        raise ValidationError(f"no builtin scenario named {name!r}")
    for s in matches:
        if mode is None or s.mode == mode:
            return s
    raise ValidationError(f"builtin {name!r} has no {mode.value} variant")


def has_baseline(name: str) -> bool:
    name = ALIASES.get(name, name)
    return any(s.name == name and s.mode == BASELINE for s in builtin_scenarios())
