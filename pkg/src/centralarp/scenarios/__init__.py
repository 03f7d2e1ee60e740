"""Scenario definitions, runner, reports and secure-vs-baseline comparison."""

from .builtin import builtin_names, builtin_scenarios, get_builtin, has_baseline
from .compare import Comparison, ComparisonRow, MismatchedScenario, check_expectations, compare, merge
from .model import Expectation, Scenario, Step, ValidationError, load_scenario
from .runner import (
    BLOCKED,
    BLOCKED_WITH_RECOVERY,
    NOT_APPLICABLE,
    SUCCEEDED,
    Report,
    World,
    derive_seed,
    episode_counts,
    run_once,
    run_scenario,
    run_world,
)

__all__ = [
    "BLOCKED",
    "BLOCKED_WITH_RECOVERY",
    "NOT_APPLICABLE",
    "SUCCEEDED",
    "Comparison",
    "ComparisonRow",
    "Expectation",
    "MismatchedScenario",
    "Report",
    "Scenario",
    "Step",
    "ValidationError",
    "World",
    "builtin_names",
    "builtin_scenarios",
    "check_expectations",
    "compare",
    "derive_seed",
    "episode_counts",
    "get_builtin",
    "has_baseline",
    "load_scenario",
    "merge",
    "run_once",
    "run_scenario",
    "run_world",
]
