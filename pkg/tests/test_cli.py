import csv
import json
import math
import subprocess
import sys

import numpy as np
import pytest

from peakwave import cli
from peakwave.cli import ConfigError, RunConfig, main, resolve_config
from peakwave.errors import ConvergenceError
from peakwave.output import config_hash, format_value, write_csv, write_json
from peakwave.plotting import Series, line_figure


def _read_csv(path):
    lines = path.read_text().splitlines()
    assert lines[-1].startswith("# config-hash: ")
    return list(csv.DictReader(lines[:-1])), lines[-1].split(": ")[1]


def test_config_hash_is_order_independent():
    assert config_hash({"a": 1, "b": [1.5, 2]}) == config_hash({"b": [1.5, 2], "a": 1})
    assert config_hash({"a": 1}) != config_hash({"a": 2})
    assert len(config_hash({})) == 16


def test_format_value():
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(True) == "true" and format_value(None) == ""
    assert float(format_value(np.float64(math.pi))) == math.pi


def test_csv_layout_and_quoting(tmp_path):
    n = write_csv(tmp_path / "t.csv", ("a", "b"), [(1.0, "x,y"), (2, None)], {"k": 1})
    rows, digest = _read_csv(tmp_path / "t.csv")
    assert n == 2 and rows[0]["b"] == "x,y" and rows[1]["b"] == ""
    assert digest == config_hash({"k": 1})
    assert not list(tmp_path.glob(".*tmp"))
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", ("a",), [(1, 2)], {})


def test_json_writes_nan_as_null(tmp_path):
    write_json(tmp_path / "o.json", {"v": math.nan, "z": 1 + 2j}, {"k": 1})
    body = json.loads((tmp_path / "o.json").read_text())
    assert body["v"] is None and body["z"] == [1.0, 2.0] and body["config_hash"] == config_hash({"k": 1})


def test_svg_is_byte_stable(tmp_path):
    s = [Series([0, 1, 2], [1.0, 0.5, 0.25], "decay")]
    line_figure(tmp_path / "a.svg", s, xlabel="t", logy=True)
    line_figure(tmp_path / "b.svg", s, xlabel="t", logy=True)
    a = (tmp_path / "a.svg").read_bytes()
    assert a == (tmp_path / "b.svg").read_bytes()
    assert b"<dc:date>" not in a and a.startswith(b"<?xml")


def test_config_validation_names_fields():
    cfg = RunConfig("profile", c=0.9, n_half=4, tol=0.0, dt=-1.0)
    with pytest.raises(ConfigError) as err:
        cfg.validate()
    for name in ("c:", "n_half", "tol", "dt"):
        assert name in str(err.value)


def test_peaked_speed_allowed_only_for_peaked_commands():
    RunConfig("peaked-spectrum", c=math.pi / (2 * math.sqrt(2))).validate()
    with pytest.raises(ConfigError):
        RunConfig("profile", c=math.pi / (2 * math.sqrt(2))).validate()


def test_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"c": 1.05, "n": 64, "out": "from_file", "lambdas": [[0.1, 2.0]]}))
    cfg = resolve_config(["profile", "--config", str(conf)], env={})
    assert (cfg.c, cfg.n_half, cfg.out_dir) == (1.05, 64, "from_file")
    assert cfg.lambdas == (0.1 + 2j,)
    cfg = resolve_config(["profile", "--config", str(conf)], env={"PEAKWAVE_OUT": "from_env"})
    assert cfg.out_dir == "from_env"
    cfg = resolve_config(["profile", "--config", str(conf), "--c", "1.02", "--out", "flag"],
                         env={"PEAKWAVE_OUT": "from_env"})
    assert (cfg.c, cfg.n_half, cfg.out_dir) == (1.02, 64, "flag")
    assert resolve_config(["profile"], env={}).c == 1.03


def test_config_file_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"nonsense": 1}')
    with pytest.raises(ConfigError):
        resolve_config(["profile", "--config", str(bad)], env={})
    with pytest.raises(ConfigError):
        resolve_config(["profile", "--config", str(tmp_path / "missing.json")], env={})


@pytest.mark.parametrize("argv", [["profile", "--n", "3"], ["nope"], ["profile", "--c", "abc"],
                                  ["spectrum", "--method", "spline"], ["evolve", "--dt", "0"]])
def test_invalid_input_exits_one(argv, capsys):
    assert main(argv) == cli.EXIT_INVALID
    assert "invalid configuration" in capsys.readouterr().err


def test_profile_command(tmp_path, capsys):
    assert main(["profile", "--c", "1.03", "--n", "300", "--tol", "1e-14", "--out", str(tmp_path), "--plot"]) == 0
    rows, digest = _read_csv(tmp_path / "profile.csv")
    assert len(rows) == 601 and list(rows[0]) == ["x", "eta", "slope"]
    assert float(rows[300]["x"]) == 0.0
    assert (tmp_path / "profile.svg").exists()
    assert "profile.csv (601 rows)" in capsys.readouterr().out
    summary = json.loads((tmp_path / "profile.json").read_text())
    assert summary["config_hash"] == digest


def test_spectrum_command(tmp_path):
    code = main(["spectrum", "--c-list", "1.01,1.03,1.05,1.07,1.09", "--n", "64", "--method", "both",
                 "--out", str(tmp_path), "--jobs", "1", "--dump-matrices"])
    assert code == 0
    rows, _ = _read_csv(tmp_path / "spectrum.csv")
    assert len(rows) == 5 * 2 * 4
    assert {r["parity"] for r in rows if r["k"] == "3"} == {"odd"}
    assert (tmp_path / "fourier_constant.json").exists()
    assert (tmp_path / "L_fd_c1.03.txt").exists()


def test_sweep_near_peaked_speed(tmp_path):
    assert main(["sweep", "--c-list", "1.03,1.1107", "--out", str(tmp_path)]) == 0
    rows, _ = _read_csv(tmp_path / "sweep.csv")
    assert [r["kind"] for r in rows] == ["smooth", "smooth", "peaked"]
    assert float(rows[0]["amplitude"]) < float(rows[1]["amplitude"]) < float(rows[2]["amplitude"])


def test_row_failures_exit_three(tmp_path, monkeypatch):
    from peakwave import waveprofile

    def failing(c_values, grid=None, jobs=1):
        return [waveprofile.SweepRow(c, math.nan, math.nan, error="NoRootError: forced") for c in c_values]

    monkeypatch.setattr(waveprofile, "amplitude_sweep", failing)
    assert main(["sweep", "--c-list", "1.03", "--out", str(tmp_path)]) == cli.EXIT_PARTIAL
    rows, _ = _read_csv(tmp_path / "sweep.csv")
    assert rows[0]["error"] == "NoRootError: forced"


def test_peaked_spectrum_and_strip(tmp_path):
    assert main(["peaked-spectrum", "--n-list", "16,32", "--method", "both", "--out", str(tmp_path)]) == 0
    rows, _ = _read_csv(tmp_path / "peaked_spectrum.csv")
    assert len(rows) == 2 * 2 * 4
    assert main(["strip", "--n", "128", "--lambdas", "0,0.3,1.5,0.7853981633974483",
                 "--out", str(tmp_path), "--plot"]) == 0
    rows, _ = _read_csv(tmp_path / "strip.csv")
    assert [r["class"] for r in rows] == ["interior", "interior", "resolvent", "boundary"]
    assert rows[-1]["status"] == "untested"


def test_evolve_command(tmp_path):
    assert main(["evolve", "--delta", "0.01", "--t-end", "1", "--dt", "0.01", "--labels", "65",
                 "--out", str(tmp_path)]) == 0
    rows, _ = _read_csv(tmp_path / "evolve.csv")
    assert len(rows) == 101 and float(rows[0]["V0"]) == pytest.approx(-0.01)
    summary = json.loads((tmp_path / "experiment.json").read_text())
    assert summary["theory_rate"] == pytest.approx(math.sqrt(2) / 2)


def test_aborted_run_exits_two(tmp_path, monkeypatch, capsys):
    def boom(cfg, out):
        raise ConvergenceError("forced")

    monkeypatch.setitem(cli._DISPATCH, "profile", boom)
    assert cli.run(RunConfig("profile", out_dir=str(tmp_path))) == cli.EXIT_ABORTED
    assert "forced" in capsys.readouterr().err


def test_same_config_same_bytes(tmp_path):
    for sub in ("a", "b"):
        assert main(["strip", "--n", "64", "--lambdas", "0.3,1.2", "--out", str(tmp_path / sub), "--plot"]) == 0
    for name in ("strip.csv", "strip.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "peakwave", "profile", "--n", "2"],
                          capture_output=True, text=True)
    assert proc.returncode == 1 and "n_half" in proc.stderr
