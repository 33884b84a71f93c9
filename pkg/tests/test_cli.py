import csv
import json

import pytest

from spduff.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_check_d0_reports_a1(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "check", "--builtin", "D0", "--out", str(tmp_path))
    assert code == 1
    doc = json.loads(out)
    assert doc["schema_version"]
    assert any(v["check"] == "A1" for v in doc["report"]["violations"])
    rows = list(csv.reader((tmp_path / "manifold.csv").open()))
    assert rows[0] == ["t", "u1", "u2", "u3"]
    assert rows[1][2] == "" and rows[1][3] == ""


def test_check_d1_passes(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "check", "--builtin", "D1", "--out", str(tmp_path))
    assert code == 0
    doc = json.loads(out)
    assert doc["report"]["A4"] == "passed"
    rows = list(csv.DictReader((tmp_path / "manifold.csv").open()))
    first, mid = rows[0], rows[len(rows) // 2]
    assert first["u2"] == "" and first["u1"] != ""
    assert all(mid[k] != "" for k in ("u1", "u2", "u3"))


def test_check_problem_file(capsys, tmp_path):
    from spduff.problem import builtin, dump_problem

    path = tmp_path / "p.json"
    dump_problem(builtin("D2"), path)
    code, out, _ = run_cli(capsys, "check", str(path))
    assert code == 0
    assert json.loads(out)["problem"] == "p"


def test_missing_problem_file_is_usage_error(capsys, tmp_path):
    code, _, err = run_cli(capsys, "check", str(tmp_path / "nope.json"))
    assert code == 2 and "usage error" in err


def test_usage_error_exit_code(capsys):
    assert run_cli(capsys, "sweep", "--builtin", "D1", "--delta", "-1")[0] == 2
    assert run_cli(capsys, "sweep", "--builtin", "D1", "--eps", "0.01,0.01")[0] == 2


def test_energy_json(capsys):
    code, out, _ = run_cli(capsys, "energy", "--builtin", "D1", "--t", "0", "--level", "0.05")
    assert code == 0
    doc = json.loads(out)
    assert doc["turning_points"]["y_right"] == pytest.approx(1.4475652368754688, abs=1e-12)
    assert doc["action_frequency"]["omega"] > 0
    assert doc["A4"]["A4"] == "passed"


def test_energy_separatrix_is_failure(capsys):
    code, out, _ = run_cli(capsys, "energy", "--builtin", "D1", "--t", "0", "--level", "0")
    assert code == 1
    assert json.loads(out)["action_frequency"]["error"] == "SeparatrixLevel"


def test_constants_json_and_failure(capsys):
    code, out, _ = run_cli(capsys, "constants", "--builtin", "D1", "--eps", "0.01")
    assert code == 0
    doc = json.loads(out)
    assert [c["chart_id"] for c in doc["constants"]] == ["K1", "K2", "K3"]
    assert all("argmin" in c for c in doc["constants"])
    code, out, _ = run_cli(capsys, "constants", "--builtin", "D1", "--eps", "0.2")
    assert code == 1
    assert json.loads(out)["witness"]["chart"] == "K2"


def test_simulate_outputs(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "simulate", "--builtin", "D0", "--eps", "0.01", "--y0", "1", "--out", str(tmp_path))
    assert code == 0
    traj = list(csv.DictReader((tmp_path / "trajectory.csv").open()))
    assert list(traj[0]) == ["t", "y", "w", "H"]
    assert float(traj[0]["H"]) == pytest.approx(0.5)
    events = list(csv.DictReader((tmp_path / "events.csv").open()))
    assert list(events[0]) == ["branch", "t_star", "direction", "residual"]
    assert len(events) in (31, 32)


def test_simulate_backward_span(capsys, tmp_path):
    code, _, _ = run_cli(
        capsys, "simulate", "--builtin", "D1", "--eps", "0.02", "--t0", "0.5", "--t1", "-0.5", "--out", str(tmp_path)
    )
    assert code == 0
    t = [float(r["t"]) for r in csv.DictReader((tmp_path / "trajectory.csv").open())]
    assert t[0] == pytest.approx(-0.5) and t[-1] == pytest.approx(0.5)


def test_phase_portrait_has_three_panels(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "phase-portrait", "--builtin", "D1", "--t", "0", "--out", str(tmp_path))
    assert code == 0
    svg = (tmp_path / "phase_t0.svg").read_text()
    assert svg.count('id="axes_') == 3
    for label in ("f(y) - m(t)", "V(t, y)", "w", "y"):
        assert f"<!-- {label} -->" in svg


def test_sweep_d0_outputs(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "sweep", "--builtin", "D0", "--out", str(tmp_path))
    assert code == 0
    rows = list(csv.reader((tmp_path / "sweep.csv").open()))
    assert rows[0] == ["epsilon", "chart", "z", "s_max", "bound", "envelope_sup_error", "converged_envelope_error"]
    assert len(rows) == 4
    ratios = list(csv.DictReader((tmp_path / "ratios.csv").open()))
    assert len(ratios) == 2
    names = sorted(p.name for p in tmp_path.iterdir())
    for expected in ("manifold.svg", "oscillations.svg", "phase_t0.svg", "phase_t0.5.svg", "sweep.json", "config.json"):
        assert expected in names
    doc = json.loads((tmp_path / "sweep.json").read_text())
    assert doc["schema_version"] and doc["passed"] is True


def test_sweep_d1_figures(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "sweep", "--builtin", "D1", "--eps", "0.02,0.01", "--out", str(tmp_path))
    assert code == 0
    for label in ("-0.5", "min", "0", "max", "0.5"):
        assert (tmp_path / f"phase_t{label}.svg").exists()
    assert len(list(csv.reader((tmp_path / "sweep.csv").open()))) == 7


def test_sweep_with_failing_eps_exits_one(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "sweep", "--builtin", "D1", "--eps", "0.2", "--out", str(tmp_path))
    assert code == 1
    assert json.loads((tmp_path / "sweep.json").read_text())["errors"]


def test_unwritable_output_is_failure(capsys, tmp_path):
    blocker = tmp_path / "f"
    blocker.write_text("")
    code, out, _ = run_cli(capsys, "sweep", "--builtin", "D0", "--eps", "0.02", "--out", str(blocker / "x"))
    assert code == 1
    assert json.loads(out)["error"] == "IoError"


def test_module_entry_point():
    import subprocess
    import sys

    res = subprocess.run([sys.executable, "-m", "spduff", "check", "--builtin", "D0"], capture_output=True, text=True)
    assert res.returncode == 1
    assert json.loads(res.stdout)["report"]["A1"] == "failed"
