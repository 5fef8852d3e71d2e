import json

import pytest

from threshold_spectra import cli

SMALL = {"grid": {"n": 32, "box_length": 8.0}, "energy_ladder": {"count": 6}}


def write_config(tmp_path, name="run.json", **updates):
    data = {**SMALL, **updates}
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


def test_threshold_writes_outputs(tmp_path):
    cfg = write_config(tmp_path)
    out = tmp_path / "out"
    assert cli.main(["threshold", "--config", cfg, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["threshold"]["lambda_c"] > 2.0
    rows = (out / "threshold.csv").read_text().splitlines()
    assert rows[0] == "E,lambda,alpha,mu_cauchy_residual"
    assert len(rows) == 7


def test_outputs_are_deterministic(tmp_path):
    cfg = write_config(tmp_path)
    texts = []
    for name in ("a", "b"):
        assert cli.main(["threshold", "--config", cfg, "--out", str(tmp_path / name)]) == 0
        texts.append(((tmp_path / name / "threshold.csv").read_bytes(), (tmp_path / name / "summary.json").read_bytes()))
    assert texts[0] == texts[1]


def test_env_out_directory(tmp_path, monkeypatch):
    cfg = write_config(tmp_path)
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env_out"))
    assert cli.main(["threshold", "--config", cfg]) == 0
    assert (tmp_path / "env_out" / "summary.json").exists()


def test_converge_lists_inadmissible_weight(tmp_path):
    cfg = write_config(tmp_path, weights=[{"s": 0.0}, {"s": 1.0}])
    out = tmp_path / "out"
    cli.main(["converge", "--config", cfg, "--out", str(out)])
    summary = json.loads((out / "summary.json").read_text())
    entries = {w["weight"]: w for w in summary["weights"]}
    assert entries["power_s0"]["admissible"] is False
    assert entries["power_s1"]["admissible"] is True
    assert (out / "convergence_power_s1.csv").exists()
    assert not (out / "convergence_power_s0.csv").exists()
    assert summary["state"]["classification"] in ("resonance", "eigenvalue")


def test_lower_branch_tagged(tmp_path):
    cfg = write_config(tmp_path, model={"kind": "dirac"}, branch="lower",
                       grid={"n": 16, "box_length": 8.0}, energy_ladder={"count": 4})
    out = tmp_path / "out"
    assert cli.main(["threshold", "--config", cfg, "--out", str(out)]) == 0
    tags = json.loads((out / "summary.json").read_text())["tags"]
    assert tags["branch"] == "lower" and "lower_branch" in tags


@pytest.mark.parametrize("argv", [["frobnicate"], ["check", "nope"], []])
def test_usage_errors(argv, tmp_path):
    assert cli.main(argv + ["--out", str(tmp_path)] if argv else argv) == 2


def test_bad_ladder_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, energy_ladder={"energies": [-1.0, -0.5, -0.7, -0.1]})
    assert cli.main(["threshold", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "energy_ladder" in capsys.readouterr().err


def test_check_suite(tmp_path, capsys):
    assert cli.main(["check", "fw", "--out", str(tmp_path)]) == 0
    assert "PASS fw" in capsys.readouterr().out
    payload = json.loads((tmp_path / "checks_fw.json").read_text())
    assert payload["failed"] == []
