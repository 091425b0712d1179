import csv
import json
import re

import pytest

from drawstring.cli import ConfigError, render_csv, resolve, run


def _run(argv, capsys):
    code = run(argv)
    return code, capsys.readouterr().out


def test_construct_default_passes(capsys):
    code, out = _run(["construct", "--method", "B", "--k", "0", "--epsilon", "0.1", "--delta", "0.1",
                      "--r0", "1e-3"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["status"] == "pass" and doc["schema"] == 1
    assert all(c["status"] == "pass" for c in doc["result"]["certification"]["conditions"].values())


def test_malformed_value_names_the_field(capsys):
    code, out = _run(["construct", "--epsilon", "-1"], capsys)
    doc = json.loads(out)
    assert code == 1 and doc["status"] == "error" and doc["error"]["field"] == "epsilon"


def test_missing_command(capsys):
    code, out = _run([], capsys)
    assert code == 1 and json.loads(out)["error"]["field"] == "command"


def test_config_file_unknown_key(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("command = certify\nbogus = 1\n")
    code, out = _run(["--config", str(cfg)], capsys)
    assert code == 1 and json.loads(out)["error"]["field"] == "bogus"


def test_flags_override_file(tmp_path):
    cfg = {"command": "certify", "epsilon": "0.2", "delta": "0.3"}
    merged = resolve(cfg, {"epsilon": "0.05"})
    assert merged["epsilon"] == 0.05 and merged["delta"] == 0.3
    with pytest.raises(ConfigError):
        resolve({"command": "certify", "delta": "1.5"}, {})


def test_report_stable_modulo_timestamp(tmp_path):
    outs = []
    for j in range(2):
        rep, table = tmp_path / f"r{j}.json", tmp_path / f"t{j}.csv"
        assert run(["certify", "--k", "1", "--out", str(rep), "--csv", str(table), "--grid", "1000"]) == 0
        text = re.sub(r'"timestamp": "[^"]*"', '"timestamp": ""', rep.read_text())
        outs.append((text, table.read_bytes()))
    assert outs[0] == outs[1]


def test_sequence_csv(tmp_path):
    table = tmp_path / "seq.csv"
    assert run(["sequence", "--topology", "T3", "--i-max", "4", "--grid", "1000", "--out", str(tmp_path / "s.json"),
                "--csv", str(table)]) == 0
    rows = list(csv.reader(table.read_text().splitlines()))
    assert rows[0] == ["i", "eps", "delta", "H", "volU", "w1p_1.5"]
    assert [int(r[0]) for r in rows[1:]] == [2, 3, 4]
    assert b"\r" not in table.read_bytes()


def test_csv_uses_round_trip_floats():
    text = render_csv([("a", "b"), (1, 0.1)])
    assert text == "a,b\n1,0.1\n"
