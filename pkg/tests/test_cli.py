from __future__ import annotations

import json
import subprocess
import sys
from fractions import Fraction

import jsonschema
import pytest

from hecke_walk.algebra import FieldContext, GroupElem
from hecke_walk.balls import BallMeasure
from hecke_walk.cli import ConfigError, RunConfig, dumps, main, run, schema
from hecke_walk.measures import SparseMeasure, e_lamp


def run_cli(argv, tmp_path, name="out"):
    out = tmp_path / name
    code = main(argv + ["--output", str(out)])
    report = (out / "report.json").read_text() if (out / "report.json").exists() else None
    return code, report, out


def valid(report_text):
    report = json.loads(report_text)
    jsonschema.validate(report, schema())
    return report


def test_check_absorbing_lamp_file(tmp_path):
    path = tmp_path / "lamp.json"
    path.write_text(e_lamp().to_json())
    code, text, _ = run_cli(["check-absorbing", "--mode", "modular", "--measure", str(path)], tmp_path)
    assert code == 0
    assert valid(text)["result"]["absorbing"] is True


def test_check_absorbing_failure_has_witness(tmp_path):
    ctx = FieldContext(2, "modular")
    path = tmp_path / "bad.json"
    path.write_text(SparseMeasure.delta(GroupElem(ctx.one(), 1)).to_json())
    code, text, _ = run_cli(["check-absorbing", "--mode", "modular", "--measure", str(path)], tmp_path)
    assert code == 3
    result = valid(text)["result"]
    assert result["absorbing"] is False
    assert sorted(result["witness"].values()) == ["0", "1"]


def test_completion_precondition(tmp_path):
    ctx = FieldContext(2, "modular")
    path = tmp_path / "bad.json"
    path.write_text(SparseMeasure.delta(GroupElem(ctx.one(), 1)).to_json())
    code, text, _ = run_cli(["completion", "--mode", "modular", "--measure", str(path)], tmp_path)
    assert code == 2
    report = valid(text)
    assert report["status"] == "precondition" and report["result"]["witness"]


def test_completion_ok(tmp_path):
    code, text, out = run_cli(["completion", "--preset", "e-bs"], tmp_path)
    assert code == 0
    result = valid(text)["result"]
    assert result["drift"] == "1/2" and result["support_is_saturation"]
    assert (out / "theta.json").exists()


def test_subsum_classify_interval(tmp_path):
    code, text, _ = run_cli(["subsum", "--beta", "geometric:a=1,rho=0.5", "--op", "classify"], tmp_path)
    assert code == 0
    result = valid(text)["result"]
    assert result["classification"] == "interval" and result["B0"] == "2"


def test_subsum_member_and_enumerate(tmp_path):
    code, text, _ = run_cli(["subsum", "--beta", "geometric:a=1,rho=1/3", "--op", "member",
                             "--target", "3/4", "--N", "20"], tmp_path)
    assert code == 0 and valid(text)["result"]["verdict"] == "out"
    code, text, out = run_cli(["subsum", "--beta", "list:1/2,1/4", "--op", "enumerate", "--N", "2"],
                              tmp_path, "enum")
    assert code == 0 and valid(text)["result"]["sums"] == ["0", "1/4", "1/2", "3/4"]
    assert (out / "sums.csv").read_text().splitlines()[0] == "sum_num,sum_den"


def test_construct_and_spectrum(tmp_path):
    code, text, out = run_cli(["construct", "--method", "affine-step", "--set", "delta=\"3/4\""], tmp_path)
    assert code == 0 and valid(text)["result"]["absorbing"]
    built = SparseMeasure.from_json((out / "measure.json").read_text(), FieldContext(2))
    from hecke_walk.measures import e_bs

    assert built == e_bs()
    code, text, _ = run_cli(["spectrum", "--beta", "geometric:a=1/2,rho=1/2",
                             "--set", "subset=[1,3]", "--set", "M=8"], tmp_path, "spectrum")
    result = valid(text)["result"]
    assert code == 0 and result["value"] == "5/8" and result["agrees"]


def test_decouple_grid_and_control(tmp_path):
    code, text, _ = run_cli(["decouple", "--mode", "modular", "--z1", "0:1", "--z2", "0:1;1:1",
                             "--m-range", "-3", "3"], tmp_path)
    assert code == 0 and valid(text)["result"]["all_zero"]
    code, text, _ = run_cli(["decouple", "--mode", "modular", "--z1", "0:1", "--z2", "0:1"], tmp_path, "ctl")
    result = valid(text)["result"]
    assert code == 3 and result["hypotheses"]["status"] == "hypotheses violated"


def test_stationary_csv_round_trip(tmp_path):
    argv = ["stationary", "--mode", "modular", "--preset", "e-lamp", "--window", "0", "3",
            "--samples", "4000", "--seed", "5"]
    code, text, out = run_cli(argv, tmp_path)
    assert code == 0
    result = valid(text)["result"]
    csv_text = (out / "stationary.csv").read_text()
    nu = BallMeasure.from_csv(csv_text, FieldContext(2, "modular"), (0, 3))
    assert nu.to_csv() == csv_text
    assert nu.total() == 1 and result["n_samples"] == 4000


def test_stationary_tolerance_failure(tmp_path):
    code, text, _ = run_cli(["stationary", "--preset", "e-bs", "--window", "-2", "3", "--samples", "500",
                             "--set", "max_deviation=1e-6"], tmp_path)
    assert code == 3 and valid(text)["result"]["failed"] == ["max_deviation"]


def test_drift_precondition(tmp_path):
    ctx = FieldContext(2)
    path = tmp_path / "down.json"
    path.write_text(SparseMeasure.delta(GroupElem(ctx.zero(), -1)).to_json())
    code, text, _ = run_cli(["simulate", "--measure", str(path), "--set", "what=\"boundary\""], tmp_path)
    assert code == 2 and valid(text)["status"] == "precondition"


def test_reports_are_byte_identical(tmp_path, monkeypatch):
    argv = ["stationary", "--preset", "e-bs", "--window", "-2", "4", "--samples", "70000", "--seed", "9"]
    _, a, out = run_cli(argv, tmp_path)
    csv_a = (out / "stationary.csv").read_bytes()
    monkeypatch.setenv("HECKE_WALK_THREADS", "3")
    _, b, _ = run_cli(argv, tmp_path)
    assert a == b
    assert (out / "stationary.csv").read_bytes() == csv_a


def test_every_subcommand_validates(tmp_path):
    cases = [
        ["simulate", "--preset", "e-bs", "--set", "steps=5"],
        ["simulate", "--preset", "e-bs", "--set", "what=\"boundary\""],
        ["entropy", "--mode", "modular", "--preset", "e-lamp"],
        ["entropy", "--preset", "e-bs", "--set", "method=\"conv-power\"", "--set", "n_max=6"],
        ["construct", "--mode", "modular", "--preset", "e-lamp", "--method", "commuting-average"],
        ["decouple", "--mode", "modular", "--z1", "0:1", "--z2", "0:1;1:1", "--set", "y=\"0\"",
         "--set", "m=0"],
    ]
    for i, argv in enumerate(cases):
        code, text, _ = run_cli(argv, tmp_path, f"c{i}")
        assert code == 0, argv
        valid(text)


def test_config_round_trip_and_unknown_keys(tmp_path):
    cfg = RunConfig("subsum", inputs={"beta": "geometric:a=1,rho=1/3", "op": "classify"},
                    budgets={"N": 8}, seed=7).validate()
    assert RunConfig.from_json(cfg.to_json()) == cfg
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"subcommand": "subsum", "colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig("subsum", inputs={"beta": "x", "bogus": 1}).validate()
    with pytest.raises(ConfigError):
        RunConfig("stationary", budgets={"steps": 3}).validate()
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"subcommand": "subsum", "extra": 1}))
    assert main(["--config", str(path)]) == 1


def test_config_file_run(tmp_path):
    cfg = RunConfig("subsum", inputs={"beta": "geometric:a=1,rho=1/2"}, output=str(tmp_path / "o"))
    path = tmp_path / "run.json"
    path.write_text(cfg.to_json())
    assert main(["--config", str(path)]) == 0
    assert valid((tmp_path / "o" / "report.json").read_text())["config"] == json.loads(cfg.to_json())


def test_io_and_parse_errors(tmp_path, capsys):
    assert main(["check-absorbing", "--measure", str(tmp_path / "missing.json")]) == 1
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["check-absorbing", "--measure", str(bad)]) == 1
    assert main(["--config", str(bad)]) == 1
    assert main(["check-absorbing", "--mode", "modular", "--preset", "e-bs"]) == 1
    assert main([]) == 1
    assert "error" in capsys.readouterr().err


def test_dumps_formats():
    assert dumps(Fraction(3, 4)) == '"3/4"'
    assert dumps(Fraction(4, 2)) == '"2"'
    assert dumps(0.1) == "0.10000000000000001"
    assert dumps(1.0) == "1.0"
    assert json.loads(dumps({"a": [1, 2.5, None, True]})) == {"a": [1, 2.5, None, True]}


def test_stdout_and_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "hecke_walk", "subsum", "--beta", "geometric:a=1,rho=1/3"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["result"]["classification"] == "cantor"


def test_run_returns_codes_directly(tmp_path):
    cfg = RunConfig("subsum", inputs={"beta": "geometric:a=1,rho=1/2"}, output=str(tmp_path))
    assert run(cfg) == 0
