import json
import subprocess
import sys

import numpy as np
import pytest

from twolevel_consensus import cli
from twolevel_consensus.errors import ParseError, ValidationError
from twolevel_consensus.export import read_trajectory_csv, trajectory_csv
from twolevel_consensus.scenario import (
    demo_scenario,
    parse_scenario,
    scenario_from_dict,
    scenario_to_dict,
)
from twolevel_consensus.simulator import run


def _write(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return path


@pytest.fixture
def demo_dict():
    return scenario_to_dict(demo_scenario())


def test_parse_demo_file_round_trip(tmp_path, demo_dict):
    s = parse_scenario(_write(tmp_path, demo_dict))
    assert s == demo_scenario()
    assert scenario_to_dict(s) == demo_dict


def test_parse_printed_agent3_names_origin_zero(tmp_path):
    data = scenario_to_dict(demo_scenario(printed_agent3=True))
    with pytest.raises(ValidationError) as exc:
        parse_scenario(_write(tmp_path, data))
    assert exc.value.checks == ["origin_zero"]
    assert "check_no_origin_zero" in str(exc.value)


def test_parse_switch_off_grid(tmp_path, demo_dict):
    demo_dict["topology"]["schedule"]["dwell"] = 2.5
    demo_dict["numerics"]["dt"] = 1.0
    with pytest.raises(ValidationError) as exc:
        parse_scenario(_write(tmp_path, demo_dict))
    assert "grid_alignment" in exc.value.checks


def test_parse_aggregates_failures(tmp_path, demo_dict):
    demo_dict["agents"][2]["c"] = [[0.0, 1.0, 0.0]]
    demo_dict["topology"] = {"graph": {"edges": [{"from": 1, "to": 2}, {"from": 2, "to": 3}, {"from": 3, "to": 4}]}}
    with pytest.raises(ValidationError) as exc:
        parse_scenario(_write(tmp_path, demo_dict))
    assert set(exc.value.checks) == {"origin_zero", "connectivity", "balance"}


def test_parse_minimality_failure(tmp_path, demo_dict):
    demo_dict["agents"][1]["A"] = [[1.0, 0.0], [0.0, 1.0]]
    demo_dict["agents"][1]["b"] = [[1.0], [0.0]]
    with pytest.raises(ValidationError) as exc:
        parse_scenario(_write(tmp_path, demo_dict))
    assert "minimality" in exc.value.checks


@pytest.mark.parametrize(
    "mutate, field",
    [
        (lambda d: d.update(schema_version=7), "schema_version"),
        (lambda d: d["agents"][0].pop("A"), "agents[0].A"),
        (lambda d: d["agents"][1].update(x0=[1.0]), "agents[1].x0"),
        (lambda d: d["agents"][0].update(z0=[1.0]), "agents[0].z0"),
        (lambda d: d.update(controller="pid"), "controller"),
        (lambda d: d["numerics"].update(dt=-1.0), "numerics.dt"),
        (lambda d: d["topology"]["schedule"].update(order=[1, 3]), "topology.schedule.order"),
        (lambda d: d["topology"]["schedule"]["graphs"][0]["edges"].append({"from": 1, "to": 9}), "topology.schedule.graphs[0]"),
    ],
)
def test_parse_errors_are_field_addressed(tmp_path, demo_dict, mutate, field):
    mutate(demo_dict)
    with pytest.raises(ParseError) as exc:
        parse_scenario(_write(tmp_path, demo_dict))
    assert exc.value.field == field


def test_parse_malformed_json_reports_line(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  "agents": [\n}')
    with pytest.raises(ParseError, match="line 4"):
        parse_scenario(path)


def test_complex_poles_round_trip(demo_dict):
    demo_dict["agents"][1]["poles"] = [[-1.0, 2.0], [-1.0, -2.0]]
    s = scenario_from_dict(demo_dict)
    assert scenario_to_dict(s)["agents"][1]["poles"] == [[-1.0, 2.0], [-1.0, -2.0]]


def test_csv_round_trip_is_bit_exact(tmp_path):
    traj, _ = run(demo_scenario(t_final=2.0))
    path = tmp_path / "t.csv"
    path.write_text(trajectory_csv(traj))
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back["t"], traj.times)
    for name in ("y", "z", "e", "u", "v"):
        np.testing.assert_array_equal(back[name], getattr(traj, name))


def test_cmd_check_reports(tmp_path, demo_dict, capsys):
    path = _write(tmp_path, demo_dict)
    before = path.read_bytes()
    assert cli.cmd_check(path) == 0
    text = capsys.readouterr().out
    assert "X=[0., 0., 1.] U=-1" in text
    assert text.count("strongly_connected=pass") == 2
    assert path.read_bytes() == before

    bad = _write(tmp_path, scenario_to_dict(demo_scenario(printed_agent3=True)), "bad.json")
    assert cli.cmd_check(bad) != 0
    text = capsys.readouterr().out
    assert "check_no_origin_zero=FAIL" in text and "result: FAIL" in text

    demo_dict["numerics"]["dt"] = 1.0
    demo_dict["topology"]["schedule"]["dwell"] = 2.5
    assert cli.cmd_check(_write(tmp_path, demo_dict, "grid.json")) != 0
    assert "[grid_alignment]" in capsys.readouterr().out


def test_cmd_run_writes_only_under_out(tmp_path, demo_dict, capsys):
    demo_dict["numerics"]["t_final"] = 20.0
    path = _write(tmp_path, demo_dict)
    out = tmp_path / "results"
    assert cli.cmd_run(path, out_dir=out) == 0
    assert sorted(p.name for p in out.iterdir()) == ["metrics.json", "trajectory.csv"]
    assert sorted(p.name for p in tmp_path.iterdir()) == ["results", "scenario.json"]
    metrics = json.loads((out / "metrics.json").read_text())
    assert set(metrics) >= {"final_errors", "settling_time", "max_sum_drift", "bound_violations", "ave_y0"}
    assert metrics["ave_y0"] == 1.5
    header = (out / "trajectory.csv").read_text().splitlines()[0].split(",")
    assert header[:5] == ["t", "y_1", "y_2", "y_3", "y_4"] and header[-1] == "v_4" and len(header) == 21


def test_cmd_run_overrides(tmp_path, demo_dict, capsys):
    path = _write(tmp_path, demo_dict)
    assert cli.cmd_run(path, tfinal=0.001, out_dir=tmp_path / "short") == 1
    assert cli.cmd_run(path, controller="output", tfinal=20.0, dt=2e-3, out_dir=tmp_path / "o") == 0
    # static needs certificates the demo agents do not have
    assert cli.cmd_run(path, controller="static", out_dir=tmp_path / "s") == 2


def test_demo_paper_static_subdemo(tmp_path, capsys):
    assert cli.cmd_demo_paper(tmp_path, tfinal=10.0, controller="static") == 0
    metrics = json.loads((tmp_path / "metrics_static.json").read_text())
    assert metrics["settling_time"] is not None


def test_demo_paper_printed_agent3(tmp_path, capsys):
    assert cli.cmd_demo_paper(tmp_path, printed_agent3=True) == 2
    assert "origin_zero" in capsys.readouterr().out


def test_demo_paper_emits_reparseable_scenarios(tmp_path, capsys):
    assert cli.cmd_demo_paper(tmp_path, tfinal=40.0) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == [
        "README.md",
        "metrics_output.json",
        "metrics_state.json",
        "scenario_output.json",
        "scenario_state.json",
        "trajectory_output.csv",
        "trajectory_state.csv",
    ]
    for kind in ("state", "output"):
        s = parse_scenario(tmp_path / f"scenario_{kind}.json")
        assert s == demo_scenario(kind, stride=10)
        m = json.loads((tmp_path / f"metrics_{kind}.json").read_text())
        assert max(m["final_errors"]) < 1e-2
    assert "c3 = [0, 1, 1]" in (tmp_path / "README.md").read_text()


def test_console_entry_point(tmp_path):
    out = subprocess.run(
        [sys.executable, "-m", "twolevel_consensus", "demo-paper", "--out", str(tmp_path), "--tfinal", "20"],
        capture_output=True,
        text=True,
    )
    assert out.returncode == 0, out.stdout + out.stderr
    assert "state: settled" in out.stdout and "output: settled" in out.stdout
