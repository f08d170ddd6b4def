import json
import math
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uwcap.cli import main
from uwcap.errors import ConfigError, UwcapError
from uwcap.io import (RunManifest, build_config, default_config_path, emit_results, parse_config,
                      parse_config_text, read_results)

MINIMAL = "n_list = [16, 64]\nschedule.kind = power_law\n"


def _write(tmp_path, text, name="c.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(_write(tmp_path, MINIMAL))
    assert cfg.sweep.n_list == (16, 64)
    assert cfg.sweep.schedule.gamma_f == 0.25
    assert cfg.values["profile.alpha"] == 1.5 and cfg.values["trials"] == 8
    assert cfg.values["schedule.gamma_f"] == 0.25


def test_shipped_config():
    cfg = parse_config(default_config_path())
    assert cfg.sweep.n_list == (64, 256, 1024, 4096)
    assert cfg.profile.unit_km == 500.0


@pytest.mark.parametrize("text, pattern", [
    (MINIMAL + "profile.alpha = 3\n", r"\[1, 2\]"),
    (MINIMAL + "trials = 4\ntrials = 5\n", "duplicate key 'trials'"),
    (MINIMAL + "profile.alpah = 1.5\n", "unknown key 'profile.alpah'"),
    (MINIMAL + "trials = 'many'\n", "'trials' expects int"),
    ("schedule.kind = power_law\n", "missing required key 'n_list'"),
    (MINIMAL + "this line is wrong\n", "expected 'key = value'"),
])
def test_config_errors(tmp_path, text, pattern):
    with pytest.raises(ConfigError, match=pattern):
        parse_config(_write(tmp_path, text))


def test_comments_and_bare_words():
    vals = parse_config_text("# c\nschedule.kind = constant  # trailing\nn_list = [16]\n")
    assert vals == {"schedule.kind": "constant", "n_list": [16]}
    assert build_config(vals).sweep.schedule.gamma_f == 0.0


def test_manifest_hash_order_independent():
    a = RunManifest("sweep", {"x": 1, "y": [1, 2]}, 3)
    b = RunManifest("sweep", {"y": [1, 2], "x": 1}, 3)
    assert a.config_hash == b.config_hash
    assert RunManifest("sweep", {"x": 2, "y": [1, 2]}, 3).config_hash != a.config_hash


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False), min_size=1, max_size=5))
def test_csv_round_trip_bit_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "r.csv"
    rows = [{"i": i, "v": v} for i, v in enumerate(values)]
    emit_results(rows, "csv", path, ["i", "v"])
    back = read_results(path)
    assert [float(r["v"]) for r in back] == values


def test_empty_csv_header_only(tmp_path):
    emit_results([], "csv", tmp_path / "e.csv", ["a", "b"])
    assert (tmp_path / "e.csv").read_text() == "a,b\n"
    with pytest.raises(UwcapError):
        emit_results([], "csv", tmp_path / "f.csv")


def test_csv_json_identical(tmp_path):
    rows = [{"n": 64, "x": 0.1 + 0.2, "y": math.nan, "z": -math.inf, "s": "a,b"}]
    emit_results(rows, "csv", tmp_path / "r.csv")
    emit_results(rows, "json", tmp_path / "r.json")
    c, j = read_results(tmp_path / "r.csv")[0], read_results(tmp_path / "r.json")[0]
    assert c["x"] == j["x"] == 0.1 + 0.2
    assert math.isnan(c["y"]) and math.isnan(j["y"])
    assert c["z"] == j["z"] == -math.inf and c["s"] == j["s"] == "a,b"


def test_cli_channel(tmp_path, capsys):
    assert main(["channel", "--f", "10", "--out", str(tmp_path)]) == 0
    assert "1.187029939" in capsys.readouterr().out
    row = read_results(tmp_path / "channel.csv")[0]
    assert row["absorption_db_per_km"] == pytest.approx(1.18703, abs=1e-5)
    assert (tmp_path / "manifest_channel.json").exists()


def test_cli_unknown_command():
    proc = subprocess.run([sys.executable, "-m", "uwcap", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2 and "usage" in proc.stderr


def test_cli_config_error_exit_code(tmp_path):
    bad = _write(tmp_path, MINIMAL + "profile.alpha = 3\n")
    assert main(["channel", "--config", str(bad), "--out", str(tmp_path)]) == 3


def test_cli_io_error_exit_code(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["channel", "--out", str(blocker / "sub")]) == 4


def test_cli_cutset_and_mh(tmp_path):
    assert main(["cutset", "--n", "16", "--trials", "2", "--seed", "9", "--out", str(tmp_path)]) == 0
    row = read_results(tmp_path / "cutset.csv")[0]
    assert row["n"] == 16 and row["seed"] == 9
    assert row["mc_logdet_bits"] <= row["trace_bound_bits"] * (1 + 1e-9)
    assert main(["mh", "--n", "64", "--out", str(tmp_path)]) == 0
    modes = [r["mode"] for r in read_results(tmp_path / "mh.csv")]
    assert modes == ["regular_analytic", "regular_simulated"]
    assert main(["mh", "--n", "256", "--placement", "random", "--out", str(tmp_path),
                 "--format", "json"]) == 0
    assert json.loads((tmp_path / "mh.json").read_text())[0]["mode"] == "random_simulated"


def test_cli_env_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("UWCAP_SEED", "77")
    monkeypatch.setenv("UWCAP_OUT", str(tmp_path))
    assert main(["channel", "--f", "1"]) == 0
    manifest = json.loads((tmp_path / "manifest_channel.json").read_text())
    assert manifest["seed"] == 77 and manifest["config"]["seed"] == 77
    assert main(["channel", "--f", "1", "--seed", "5"]) == 0
    assert json.loads((tmp_path / "manifest_channel.json").read_text())["seed"] == 5
    monkeypatch.setenv("UWCAP_THREADS", "x")
    assert main(["channel", "--f", "1"]) == 2


def test_cli_sweep(tmp_path):
    cfg = _write(tmp_path, MINIMAL + "profile.unit_km = 500.0\ntrials = 2\nmh_seeds = 2\n"
                 "modes = ['cutset', 'mh_regular']\n")
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "sweep_summary.json").read_text())
    assert summary["sandwich"]["passed"]
    assert len(read_results(tmp_path / "sweep.csv")) == 4
