from __future__ import annotations

from dataclasses import dataclass

from .model import Scenario
from .runner import SUCCEEDED, Report


class MismatchedScenario(ValueError):
    pass


@dataclass(frozen=True)
class ComparisonRow:
    scenario: str
    episode: str
    secure: int
    baseline: int

    @property
    def delta(self) -> int:
        return self.secure - self.baseline


@dataclass(frozen=True)
class Comparison:
    rows: tuple[ComparisonRow, ...]

    def to_table(self) -> str:
        head = f"{'scenario':<18} {'episode':<16} {'secure':>6} {'baseline':>8} {'delta':>6}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(
                f"{r.scenario:<18} {r.episode:<16} {r.secure:>6} {r.baseline:>8} {r.delta:>+6}"
            )
        return "\n".join(lines)

    def to_dict(self) -> list[dict]:
        return [
            {"scenario": r.scenario, "episode": r.episode, "secure": r.secure,
             "baseline": r.baseline, "delta": r.delta}
            for r in self.rows
        ]


def compare(secure: Report, baseline: Report) -> Comparison:
    """Side-by-side message counts for the measured episode of one scenario family."""
    if secure.scenario != baseline.scenario:
        raise MismatchedScenario(f"{secure.scenario!r} vs {baseline.scenario!r}")
    if (secure.mode, baseline.mode) != ("secure", "baseline"):
        raise MismatchedScenario("expected one secure and one baseline report")
    if not secure.measured or not baseline.measured:
        raise MismatchedScenario(f"{secure.scenario!r} has no measured episode")
    if secure.measured["episode"] != baseline.measured["episode"]:
        raise MismatchedScenario("reports measure different episodes")
    row = ComparisonRow(
        secure.scenario,
        secure.measured["episode"],
        secure.measured["count"],
        baseline.measured["count"],
    )
    return Comparison((row,))


def merge(*comparisons: Comparison) -> Comparison:
    return Comparison(tuple(r for c in comparisons for r in c.rows))


def check_expectations(scenario: Scenario, report: Report) -> list[str]:
    """Human-readable list of unmet expectations (empty means all hold)."""
    exp = scenario.expect
    failures = []
    if exp.count is not None:
        got = report.measured["count"] if report.measured else None
        if got != exp.count:
            failures.append(f"{scenario.measure}: expected {exp.count} messages, got {got}")
    mc = report.monte_carlo
    if exp.verdict is not None and mc is None and report.verdict != exp.verdict:
        failures.append(f"verdict: expected {exp.verdict}, got {report.verdict}")
    if exp.verdict is not None and mc is not None and mc["verdicts"].get(exp.verdict, 0) != mc["trials"]:
        failures.append(f"verdict: expected {exp.verdict} in every trial, got {mc['verdicts']}")
    for host in exp.confirmed:
        if not report.nodes.get(host, {}).get("events", {}).get("change_confirmed"):
            failures.append(f"{host}: MAC change never confirmed")
    for host in exp.rate_limited:
        node = report.nodes.get(host, {})
        if not node.get("rate_limited") or not node.get("events", {}).get("change_retry"):
            failures.append(f"{host}: change request was not rate-limited and retried")
    if exp.expected_detection is not None:
        if mc is None:
            failures.append("detection expectation needs repeat > 1")
        elif abs(mc["estimate"] - exp.expected_detection) > exp.tolerance:
            failures.append(
                f"detection: {mc['estimate']:.5f} not within {exp.tolerance} of "
                f"{exp.expected_detection:.5f}"
            )
    if report.unsound and exp.expected_detection is None:
        failures.append(f"table soundness violated: {report.unsound}")
    if report.verdict == SUCCEEDED and exp.verdict is None and exp.expected_detection is None:
        failures.append("unexpected successful attack")
    return failures
