import csv
import json

import pytest

from lumigroup.cli import main, protocol_check


def run(tmp_path, *argv, sub="out"):
    out = tmp_path / sub
    code = main([*argv, "-o", str(out)])
    return code, out


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_usage_error_exit_1(tmp_path, capsys):
    assert main(["pattern", "gen"]) == 1
    assert main(["nonsense"]) == 1


def test_bad_config_value_exit_1(tmp_path):
    code, _ = run(tmp_path, "sim", "static", "--users", "1")
    assert code == 1


def test_runtime_failure_exit_2(tmp_path):
    sig = tmp_path / "flat.csv"
    sig.write_text("t_us,voltage_mv\n" + "".join(f"{20 * i},500\n" for i in range(200)))
    code, _ = run(tmp_path, "signal", "detect", "--input", str(sig))
    assert code == 2


def test_pattern_gen_and_manifest(tmp_path):
    code, out = run(tmp_path, "pattern", "gen", "--length", "4", "--count", "3", "--seed", "9")
    assert code == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 9 and man["command"] == "pattern gen"
    assert all((out / f).exists() for f in man["files"])


def test_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("LUMIGROUP_SEED", "17")
    _, out = run(tmp_path, "pattern", "gen", "--length", "2")
    assert json.loads((out / "manifest.json").read_text())["seed"] == 17
    monkeypatch.setenv("LUMIGROUP_SEED", "x")
    assert run(tmp_path, "pattern", "gen", "--length", "2", sub="o2")[0] == 1


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("users=3\nrounds=2\ntechniques=pearson/light_signal\n")
    _, out = run(tmp_path, "sim", "static", "--config", str(cfg), "--rounds", "1")
    conf = json.loads((out / "manifest.json").read_text())["config"]
    assert conf["users"] == 3 and conf["rounds"] == 1


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("colour=blue\n")
    assert run(tmp_path, "sim", "static", "--config", str(cfg))[0] == 1


def test_study_csv_shape(tmp_path):
    code, out = run(tmp_path, "study", "pattern-length", "--values", "2,4", "--users", "3", "--rounds", "2")
    assert code == 0
    r = rows(out / "study_pattern_length.csv")
    assert r[0] == ["x", "series", "value"]
    assert [row[0] for row in r[1:]] == ["2", "4"]
    assert all(0.0 <= float(row[2]) <= 1.0 for row in r[1:])


def test_study_rerun_identical(tmp_path):
    argv = ("study", "rooms", "--values", "1,2", "--users", "3", "--iteration-s", "120", "--seed", "4")
    _, a = run(tmp_path, *argv, sub="a")
    _, b = run(tmp_path, *argv, "--jobs", "2", sub="b")
    assert (a / "study_rooms.csv").read_bytes() == (b / "study_rooms.csv").read_bytes()


def test_json_format(tmp_path):
    _, out = run(tmp_path, "study", "sampling-window", "--patterns", "5", "--lengths", "2,4", "--format", "json")
    doc = json.loads((out / "study_sampling_window.json").read_text())
    assert doc


def test_protocol_check_rows():
    got = protocol_check(500, 0)
    assert [r[0] for r in got] == ["round_trip", "bad_type", "short_input", "trailing_bytes"]
    assert all(p == n for _, p, n in got)


def test_semlog_generate(tmp_path):
    code, out = run(tmp_path, "semlog", "generate", "--testbed", "sparse", "--days", "14")
    assert code == 0
    assert rows(out / "log.csv")[0] == ["start_iso8601", "duration_min", "device_ids"]
    assert len(rows(out / "devices.csv")) == 10


def test_semlog_too_short_is_config_error(tmp_path):
    assert run(tmp_path, "semlog", "classify", "--days", "14", "--classifiers", "naive_bayes",
               "--features", "combined")[0] == 1
