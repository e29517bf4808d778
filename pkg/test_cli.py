"""Tests for the command line and the task runner."""

import json

import pytest
from click.testing import CliRunner

from cli import cli, run, run_task
from reports import Report, Status, TaskResult, render_table
from scenario import Task, parse_scenario


@pytest.fixture
def invoke():
    runner = CliRunner()

    def call(*args):
        return runner.invoke(cli, list(args))

    return call


def _json(result):
    return json.loads(result.output)


def test_validate_reports_counts(invoke):
    result = invoke("validate", "--scenario", "z2-reflection", "--report", "json")
    assert result.exit_code == 0
    data = _json(result)
    assert data["status"] == "pass"
    assert data["tasks"][0]["values"]["charts"] == 1
    assert data["tasks"][0]["values"]["arrows"] == 2
    assert data["tasks"][0]["values"]["non_identity_arrows"] == 1


def test_betti_on_circle(invoke):
    result = invoke("betti", "--scenario", "circle-cover", "--report", "json")
    assert result.exit_code == 0
    task = _json(result)["tasks"][0]
    assert task["values"]["betti"][:3] == [1, 1, 0]
    assert task["values"]["delta_squared_zero"] is True


def test_betti_override_runs_a_bare_task(invoke):
    result = invoke("betti", "--scenario", "z2-reflection", "--coefficient", "orientation",
                    "--max-degree", "4", "--report", "json")
    assert result.exit_code == 0
    tasks = _json(result)["tasks"]
    assert len(tasks) == 1
    assert tasks[0]["values"]["betti"] == [0, 0, 0, 0, 0]


def test_max_degree_shortens_expectations(invoke):
    result = invoke("betti", "--scenario", "z2-reflection", "--max-degree", "3", "--report", "json")
    assert result.exit_code == 0
    assert [len(t["values"]["betti"]) for t in _json(result)["tasks"]] == [4, 4]


def test_json_is_deterministic(invoke):
    first = invoke("run", "--scenario", "z2-reflection", "--report", "json")
    second = invoke("run", "--scenario", "z2-reflection", "--report", "json")
    assert first.exit_code == 0
    assert first.output == second.output
    assert _json(first)["engine_version"] == "1.0.0"


def test_table_output(invoke):
    result = invoke("duality", "--scenario", "single-chart")
    assert result.exit_code == 0
    assert "✅" in result.output
    assert "duality" in result.output


def test_basic_on_reflection(invoke):
    result = invoke("basic", "--scenario", "z2-reflection", "--poly-degree", "3", "--report", "json")
    assert result.exit_code == 0
    values = _json(result)["tasks"][0]["values"]
    assert values["betti"] == [1, 0]
    assert values["invariant_dims"] == [2, 1]


def test_missing_scenario_is_an_error(invoke):
    result = invoke("betti", "--scenario", "no-such-scenario", "--report", "json")
    assert result.exit_code == 2
    assert '"status": "error"' in result.output


def test_wrong_presentation_kind_is_an_error(invoke):
    result = invoke("thurston", "--scenario", "z2-reflection", "--triple", "g,g,g", "--report", "json")
    assert result.exit_code == 2


def test_out_of_range_degree_is_an_error(invoke):
    result = invoke("betti", "--scenario", "z2-reflection", "--max-degree", "13", "--report", "json")
    assert result.exit_code == 2


def test_thurston_triple(invoke):
    result = invoke("thurston", "--scenario", "mobius-rotations", "--triple", "p1,d2,m4", "--report", "json")
    assert result.exit_code == 0
    value = _json(result)["tasks"][0]["values"]["value"]
    assert value == pytest.approx(-0.163281958, abs=1e-8)


def test_affine_cocycles_vanish(invoke):
    result = invoke("cocycle", "--scenario", "translations-q1", "--report", "json")
    assert result.exit_code == 0
    data = _json(result)
    assert [t["values"]["class"] for t in data["tasks"]] == ["gv", "c1"]
    assert data["sign_flag"] == -1


def test_gv_closed_on_elliptic_charts(invoke):
    result = invoke("cocycle", "--scenario", "mobius-elliptic3", "--class", "gv", "--check-closed",
                    "--max-k", "3", "--report", "json")
    assert result.exit_code == 0
    data = _json(result)
    assert data["sign_flag"] == -1
    assert data["tasks"][0]["values"]["closed_residual"] < 1e-6


def test_failed_validation_blocks_other_commands(tmp_path, invoke):
    path = tmp_path / "broken.scn"
    path.write_text('[chart] id=U, dim=1, box=[-1,1]\n[embedding] id=g, src=U, dst=U, map="-x1"\n',
                    encoding="utf-8")
    assert invoke("validate", "--scenario", str(path)).exit_code == 1
    assert invoke("betti", "--scenario", str(path)).exit_code == 2


def test_run_task_turns_engine_errors_into_status(bundled):
    scenario = bundled("z2-reflection")
    report = Report(scenario=scenario.name)
    result = run_task(scenario, Task("cocycle", {"class": "c7^9"}), {}, report)
    assert result.status is Status.ERROR
    assert "c7^9" in result.message


def test_run_collects_overall_status():
    text = "\n".join([
        "[chart] id=U, dim=1, box=[0,1]",
        "[task] command=betti, expect=\"1,1\"",
        "[task] command=validate",
    ])
    report = run(parse_scenario(text))
    assert report.status is Status.FAIL
    assert report.exit_code == 1
    assert [t.status for t in report.tasks] == [Status.FAIL, Status.PASS]
    assert "❌" in render_table(report.to_json())


def test_seed_override_leaves_the_scenario_alone(bundled):
    scenario = bundled("z2-reflection")
    seed = scenario.presentation.seed
    report = run(scenario, {"seed": 5}, "validate")
    assert report.seed == 5
    assert report.status is Status.PASS
    assert scenario.presentation.seed == seed


def test_report_json_is_rounded_and_sorted():
    report = Report(scenario="s")
    report.add(TaskResult(command="thurston", status=Status.PASS,
                          values={"value": 0.1 + 0.2, "pair": [1 / 3, float("nan")]}))
    data = json.loads(report.to_json())
    assert data["tasks"][0]["values"] == {"pair": [0.333333333333, None], "value": 0.3}
    assert list(data) == sorted(data)
    assert list(data["tasks"][0]) == sorted(data["tasks"][0])
