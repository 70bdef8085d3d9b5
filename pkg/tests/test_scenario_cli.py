import json
import subprocess
import sys

import pytest
import yaml

from icnsim import cli
from icnsim.errors import InvariantViolation, ScenarioError
from icnsim.scenario import corpus_path, load_scenario, loads_scenario, run
from icnsim.trace import check_trace, derive_report, dump_report, read_trace

from helpers import scenario_text


@pytest.fixture(scope="module")
def demo():
    return run(load_scenario(corpus_path("maas_demo")))


# -- loading ---------------------------------------------------------------------------


def test_corpus_parses_with_six_phases():
    sc = load_scenario(corpus_path("maas_demo"))
    phases = [e.phase for e in sc.timeline if e.phase]
    assert phases == ["base_slice", "mobility_slice", "conference_slice", "app_bootstrap", "mobility_enable",
                      "handover"]
    assert sc.seed == 42 and sc.duration_us == 8_000_000
    assert sc.config.interest_lifetime == 200_000


def test_unsorted_timeline_rejected():
    text = scenario_text("""
- {at: 500, action: submit_intent, service: base}
- {at: 100, action: submit_intent, service: mobility}
""")
    with pytest.raises(ScenarioError) as info:
        loads_scenario(text)
    assert info.value.line == text.splitlines().index("  - {at: 100, action: submit_intent, service: mobility}") + 1
    assert "sorted" in info.value.message


def test_undefined_node_rejected():
    text = scenario_text("- {at: 0, action: submit_intent, service: base}", ues=["u"]) + "  - {at: 1, action: ue_attach, ue: u, poa: Q}\n"
    with pytest.raises(ScenarioError) as info:
        loads_scenario(text)
    assert info.value.line == len(text.splitlines())
    assert "'Q'" in info.value.message


@pytest.mark.parametrize("mutation,needle", [
    ("    - {id: X-Y, a: X, b: A, latency: 1, bandwidth: 1}", "X"),
    ("    - {id: A-R, a: A, b: B, latency: 1, bandwidth: 1}", "duplicate"),
])
def test_bad_links_rejected(mutation, needle):
    text = scenario_text("- {at: 0, action: submit_intent, service: base}")
    text = text.replace("  links:\n", "  links:\n" + mutation + "\n")
    with pytest.raises(ScenarioError) as info:
        loads_scenario(text)
    assert needle in info.value.message


def test_unknown_config_key_rejected():
    with pytest.raises(ScenarioError):
        loads_scenario(scenario_text("- {at: 0, action: submit_intent, service: base}", config="bogus: 1"))


def test_unknown_action_rejected():
    with pytest.raises(ScenarioError):
        loads_scenario(scenario_text("- {at: 0, action: reboot}"))


def test_json_scenario_equivalent():
    sc = load_scenario(corpus_path("maas_demo"))
    raw = yaml.safe_load(corpus_path("maas_demo").read_text())
    sj = loads_scenario(json.dumps(raw))
    assert [(e.time, e.action, e.params) for e in sj.timeline] == [(e.time, e.action, e.params) for e in sc.timeline]


# -- running ---------------------------------------------------------------------------


def test_empty_timeline_zeroed_report():
    result = run(loads_scenario(scenario_text("[]")))
    assert result.report == {
        "duration_us": 0, "flows": {}, "slices": {},
        "network": {k: 0 for k in ("cache_hits", "aggregated_interests", "redirected_interests",
                                   "dropped_packets", "nrs_messages", "resolution_calls")},
    }
    assert result.violations == []


def test_demo_phases_and_invariants(demo):
    phases = [r["phase"] for r in demo.trace.of_kind("phase")]
    assert phases == ["base_slice", "mobility_slice", "conference_slice", "app_bootstrap", "mobility_enable",
                      "handover"]
    assert demo.violations == []
    assert not demo.trace.of_kind("action_error")


def test_report_is_function_of_trace(demo, tmp_path):
    path = tmp_path / "t.jsonl"
    demo.trace.write(path)
    assert derive_report(read_trace(path)) == demo.report
    assert check_trace(read_trace(path)) == []


def test_run_twice_identical(demo):
    again = run(load_scenario(corpus_path("maas_demo")))
    assert again.trace.dumps() == demo.trace.dumps()
    assert dump_report(again.report) == dump_report(demo.report)


def test_no_mobility_loses_more(demo):
    off = run(load_scenario(corpus_path("maas_demo_no_mobility")))
    lost = lambda r: sum(f["chunks_lost"] for f in r["flows"].values())
    assert lost(off.report) > lost(demo.report)


def test_conservation_holds(demo):
    for fid, f in demo.report["flows"].items():
        assert f["interests_sent"] == f["chunks_received"] + f["timeouts"] + f["in_flight_at_end"], fid


def test_check_trace_flags_problems():
    recs = [{"t": 5, "node": "x", "kind": "c_interest", "flow": "f", "seq": 0, "attempt": 0, "name": "/a"},
            {"t": 3, "node": "x", "kind": "noop"}]
    problems = check_trace(recs)
    assert any("precedes" in p for p in problems)
    assert any("flow f" in p for p in problems)


def test_until_truncates():
    sc = load_scenario(corpus_path("maas_demo"))
    short = run(sc, until=1_000_000)
    assert short.report["duration_us"] <= 1_000_000
    assert short.violations == []


# -- CLI ---------------------------------------------------------------------------------


def test_cli_run_and_oracle(tmp_path):
    trace, report = tmp_path / "t.jsonl", tmp_path / "r.json"
    assert cli.main(["run", str(corpus_path("maas_demo")), "--trace", str(trace), "--report", str(report)]) == 0
    again = tmp_path / "r2.json"
    assert cli.main(["oracle", str(trace), "--report", str(again)]) == 0
    assert report.read_bytes() == again.read_bytes()


def test_cli_validate(capsys):
    assert cli.main(["validate", str(corpus_path("maas_demo"))]) == 0
    assert "ok" in capsys.readouterr().out


def test_cli_scenario_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(scenario_text("- {at: 0, action: ue_attach, ue: ghost, poa: A}"))
    assert cli.main(["validate", str(bad)]) == 2
    assert cli.main(["run", str(bad)]) == 2
    assert f"{bad}:" in capsys.readouterr().err


def test_cli_invariant_exit_code(tmp_path, monkeypatch, capsys):
    broken = tmp_path / "t.jsonl"
    broken.write_text('{"kind":"x","node":"n","t":5}\n{"kind":"x","node":"n","t":1}\n')
    assert cli.main(["oracle", str(broken), "--report", str(tmp_path / "r.json")]) == 3

    def explode(*a, **k):
        raise InvariantViolation("boom")

    monkeypatch.setattr(cli, "run", explode)
    assert cli.main(["run", str(corpus_path("maas_demo")), "--report", str(tmp_path / "x")]) == 3
    assert "boom" in capsys.readouterr().err


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "icnsim", "validate", str(corpus_path("maas_demo"))],
                         capture_output=True, text=True, check=False)
    assert out.returncode == 0, out.stderr
