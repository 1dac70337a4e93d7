"""The ``hk`` command line: exit codes, report files and config merging."""
import json

import pytest

from horizonkit.cli import RunConfig, main


def run(tmp_path, *argv):
    out = tmp_path / "report.json"
    code = main([*argv, "--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_ode_demo(tmp_path, capsys):
    code, rep = run(tmp_path, "ode-demo")
    assert code == 0
    assert rep["schema"] == 1 and rep["pass"] is True
    assert rep["nonzero_candidates"] == {"count": 20, "rejected": 20}
    assert "hk ode-demo: PASS" in capsys.readouterr().out


def test_frame_and_killing_pass(tmp_path):
    code, rep = run(tmp_path, "frame", "misner2d", "--grid", "32")
    assert code == 0 and rep["lemma21"]["pass"]
    code, rep = run(tmp_path, "killing", "misner2d")
    assert code == 0 and rep["verdicts"] == {"causal": "PASS"}


def test_verdict_failures_exit_one(tmp_path):
    code, rep = run(tmp_path, "killing", "misner_x_t2", "--field", "shifted")
    assert code == 1 and rep["pass"] is False
    code, rep = run(tmp_path, "frame", "degenerate_control", "--grid", "16")
    assert code == 1 and rep["error"] == "DegenerateHorizonError"
    code, rep = run(tmp_path, "jet", "nonvacuum_control", "--order", "0", "--grid", "8")
    assert code == 1 and rep["hypothesis_flags"]


@pytest.mark.parametrize("argv", [
    ["jet", "bogus"],
    ["jet", "misner2d", "--order", "7"],
    ["frame"],
    ["teleport"],
    ["ode-demo", "--tol", "-1"],
    ["frame", "misner2d", "--grid", "2"],
])
def test_usage_errors_exit_two(tmp_path, argv, capsys):
    code, rep = run(tmp_path, *argv)
    assert code == 2 and rep is None


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
    assert "identities" in capsys.readouterr().out


def test_reports_are_deterministic(tmp_path):
    a = tmp_path / "a.json"
    b = tmp_path / "b.json"
    assert main(["frame", "misner_x_t2", "--grid", "4", "--out", str(a)]) == 0
    assert main(["frame", "misner_x_t2", "--grid", "4", "--out", str(b)]) == 0
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    for r in (ra, rb):
        del r["timestamp"]
        del r["config"]["out"]
    assert ra == rb


def test_config_file_merged_under_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"example": "misner2d", "grid": 16, "epsilon": 0.25}))
    code, rep = run(tmp_path, "frame", "--config", str(cfg), "--grid", "24")
    assert code == 0
    assert rep["config"]["example"] == "misner2d"
    assert rep["grid"] == [24]
    assert rep["epsilon"] == pytest.approx(0.25)


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"colour": "red"}))
    assert main(["ode-demo", "--config", str(cfg), "--out", str(tmp_path / "x.json")]) == 2
    assert "unknown config keys" in capsys.readouterr().err


def test_default_report_name():
    assert RunConfig("jet", "misner2d").default_out() == "hk-jet-misner2d.json"
    assert RunConfig("identities").default_out() == "hk-identities.json"


def test_console_script(tmp_path):
    import subprocess
    import sys

    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "horizonkit.cli", "killing", "misner_x_t2", "--grid", "4",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert json.loads(out.read_text())["command"] == "killing"
