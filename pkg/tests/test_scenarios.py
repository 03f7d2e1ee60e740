import json

import pytest

from centralarp.protocol import Mode
from centralarp.scenarios import (
    BLOCKED,
    SUCCEEDED,
    MismatchedScenario,
    Scenario,
    Step,
    ValidationError,
    builtin_names,
    builtin_scenarios,
    check_expectations,
    compare,
    get_builtin,
    load_scenario,
    merge,
    run_scenario,
)
from centralarp.scenarios.runner import episode_counts, run_world

# the Monte Carlo builtin gets its own acceptance run
FAST_BUILTINS = [s for s in builtin_scenarios() if s.repeat == 1]


def test_builtin_catalogue():
    assert set(builtin_names()) >= {
        "join", "resolve", "mac-change-clean", "attack-type1",
        "attack-type2", "dos-central", "dos-victim-montecarlo",
    }
    for name in ("join", "resolve", "mac-change-clean"):
        assert get_builtin(name, "baseline").mode == Mode.BASELINE
    assert get_builtin("mac-change", "baseline").name == "mac-change-clean"
    with pytest.raises(ValidationError):
        get_builtin("nosuch")
    with pytest.raises(ValidationError):
        get_builtin("attack-type2", "baseline")


@pytest.mark.parametrize("scenario", FAST_BUILTINS, ids=lambda s: f"{s.name}-{s.mode.value}")
def test_builtin_meets_its_expectations(scenario):
    report = run_scenario(scenario)
    assert check_expectations(scenario, report) == []


@pytest.mark.parametrize("scenario", FAST_BUILTINS, ids=lambda s: f"{s.name}-{s.mode.value}")
def test_counts_equal_trace_totals(scenario):
    report = run_scenario(scenario)
    for episode, info in report.episodes.items():
        ids = {e.send_id for e in report.trace if (e.episode or "(setup)") == episode}
        assert info["total"] == len(ids) == sum(info["by_kind"].values())


@pytest.mark.parametrize("scenario", [s for s in FAST_BUILTINS if s.mode == Mode.SECURE], ids=lambda s: s.name)
def test_host_cache_agrees_with_central_at_install(scenario):
    world = run_world(scenario)
    history = world.central.table.history
    for host in world.hosts.values():
        for entry in host.cache_log:
            truth = None
            for change in history:
                if change.time <= entry.time and change.ip == entry.ip:
                    truth = change.mac
            assert truth == entry.mac


def test_seed_changes_jittered_trace():
    s = get_builtin("attack-type1")
    a, b = run_scenario(s.with_overrides(seed=1)), run_scenario(s.with_overrides(seed=2))
    assert a.verdict == b.verdict == BLOCKED
    assert a.trace_lines() != b.trace_lines()


def test_baseline_spoof_succeeds():
    report = run_scenario(get_builtin("attack-type1", "baseline"))
    assert report.verdict == SUCCEEDED
    assert report.forged and report.forged[0]["where"] == "A"


def test_small_monte_carlo_aggregate():
    s = get_builtin("dos-victim-montecarlo").with_overrides(repeat=200)
    report = run_scenario(s)
    mc = report.monte_carlo
    assert mc["trials"] == 200
    assert mc["successes"] == mc["verdicts"].get(BLOCKED, 0)
    assert 0 < mc["stderr"] < 0.05
    assert mc["expected"] == pytest.approx(1 - 0.9**50)


def test_compare_table():
    rows = []
    for name in ("join", "resolve", "mac-change-clean"):
        rows.append(compare(run_scenario(get_builtin(name, "secure")), run_scenario(get_builtin(name, "baseline"))))
    table = merge(*rows)
    assert [(r.secure, r.baseline, r.delta) for r in table.rows] == [(6, 4, 2), (2, 2, 0), (52, 1, 51)]
    assert "mac-change-clean" in table.to_table()


def test_compare_mismatched():
    join = run_scenario(get_builtin("join", "secure"))
    resolve = run_scenario(get_builtin("resolve", "baseline"))
    with pytest.raises(MismatchedScenario):
        compare(join, resolve)
    with pytest.raises(MismatchedScenario):
        compare(join, join)


def test_json_round_trip(tmp_path):
    for s in builtin_scenarios():
        path = tmp_path / f"{s.name}-{s.mode.value}.json"
        path.write_text(json.dumps(s.to_dict()))
        assert load_scenario(path) == s


@pytest.mark.parametrize(
    "change",
    [
        {"hosts": ["A", "A"]},
        {"hosts": ["central"]},
        {"config": {"bogus": 1}},
        {"script": [{"at": 5, "do": "join", "node": "A"}, {"at": 1, "do": "join", "node": "A"}]},
        {"script": [{"at": 0, "do": "join", "node": "Z"}]},
        {"script": [{"at": 0, "do": "fly", "node": "A"}]},
        {"script": [{"at": "soon", "do": "join", "node": "A"}]},
        {"script": [{"at": 0, "do": "resolve", "node": "A", "target": "Q"}]},
        {"script": [{"at": 0, "do": "join"}]},
        {"repeat": 0},
        {"mode": "paranoid"},
        {"extra": 1},
    ],
)
def test_validation_errors(change):
    d = {"name": "t", "hosts": ["A"], "script": [{"at": 0, "do": "join", "node": "A"}]} | change
    with pytest.raises(ValidationError):
        Scenario.from_dict(d)


def test_attack_needing_central_rejected_in_baseline():
    d = {
        "name": "t", "mode": "baseline", "hosts": ["A"], "attackers": ["X"],
        "script": [{"at": 0, "do": "attack", "node": "X", "strategy": "DosFloodCentral", "victim": "A"}],
    }
    with pytest.raises(ValidationError):
        Scenario.from_dict(d)


def test_load_scenario_rejects_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(ValidationError):
        load_scenario(path)


def test_custom_scenario_runs():
    s = Scenario(
        name="three-joins",
        hosts=("A", "B", "C"),
        script=tuple(Step(i * 10, "join", h) for i, h in enumerate("ABC")),
        config={"pool_size": 2},
        measure="join:C",
    )
    report = run_scenario(s)
    assert len(report.table) == 2
    assert report.nodes["dhcp"]["events"].get("pool_exhausted") == 1
    assert report.measured == {"episode": "join:C", "count": 1}


def test_episode_counts_ignores_fanout():
    report = run_scenario(get_builtin("join", "secure"))
    assert episode_counts(report.trace)["join:A"]["total"] == 6
    broadcasts = [e for e in report.trace if e.kind == "DHCP_DISCOVER"]
    assert len(broadcasts) > 1  # one trace row per recipient, still one message


def test_report_json_is_stable():
    s = get_builtin("resolve")
    assert run_scenario(s).to_json(include_trace=True) == run_scenario(s).to_json(include_trace=True)
