import json
import os
import subprocess
import sys

import numpy as np
import pytest

from blockchaos.cli import run
from blockchaos.config import build_config, load_config_file, normalized_form, parse_complex
from blockchaos.dyson import solve_m
from blockchaos.errors import ConfigError
from blockchaos.io import Dataset, config_hash, emit, read_csv, to_jsonable
from blockchaos.model import InteractionSpec, dump_interaction_file
from oracles import cubic_two_level


def _json(path):
    with open(path) as fh:
        return json.load(fh)


def test_dyson_two_level(tmp_path):
    out = tmp_path / "m.json"
    assert run(["dyson", "--d", "2", "--n", "1", "--a-scalar", "0.1", "--z", "0+1i", "--out", str(out)]) == 0
    doc = _json(out)
    sol = doc["data"]["solutions"][0]
    m = complex(*sol["m"])
    assert m == pytest.approx(cubic_two_level(0.1, 1j), abs=1e-10)
    assert sol["residual"] <= 1e-12
    assert "timestamp" in doc["metadata"]
    assert doc["metadata"]["seed"] == doc["metadata"]["config"]["seed"]


def test_dyson_secondary_outputs(tmp_path):
    out = tmp_path / "d.json"
    code = run(["dyson", "--d", "2", "--n", "4", "--z", "0.1+0.2i", "--z2", "0.1-0.2i", "--energies", "0,0.5",
                "--quantiles", "2,4", "--out", str(out), "--deterministic"])
    assert code == 0
    assert "kernel" in _json(out)["data"]
    meta, cols, rows = read_csv(tmp_path / "d.density.csv")
    assert cols == ["E", "rho"] and len(rows) == 2
    assert float(rows[0][1]) == pytest.approx(1 / np.pi, abs=1e-6)
    _, cols, rows = read_csv(tmp_path / "d.quantiles.csv")
    assert cols == ["k", "gamma_k"] and float(rows[0][1]) == pytest.approx(-0.8079455, abs=1e-6)


def test_unknown_flag_writes_nothing(tmp_path):
    out = tmp_path / "x.csv"
    assert run(["gaps", "--d", "2", "--n", "4", "--bogus", "1", "--out", str(out)]) == 1
    assert not out.exists() and os.listdir(tmp_path) == []


def test_missing_command_and_fields(tmp_path, capsys):
    assert run([]) == 1
    empty = tmp_path / "empty.json"
    empty.write_text("")
    assert run(["gaps", "--config", str(empty)]) == 1
    err = capsys.readouterr().err
    assert "missing required field(s): d, n, out" in err


def test_validation_errors_name_field(tmp_path, capsys):
    out = str(tmp_path / "o.csv")
    assert run(["gaps", "--d", "0", "--n", "4", "--out", out]) == 1
    assert "config.d" in capsys.readouterr().err
    assert run(["twores", "--d", "1", "--n", "4", "--z1", "0.5", "--z2", "1i", "--out", out]) == 1
    assert "config.z1" in capsys.readouterr().err
    assert run(["sweep", "--d", "2", "--n", "4", "--out", out]) == 1
    assert not os.path.exists(out)


def test_wrong_n_interaction_file(tmp_path, capsys):
    path = tmp_path / "a.json"
    dump_interaction_file(np.eye(3) * 0.1, path)
    code = run(["spectrum", "--d", "2", "--n", "4", "--a-file", str(path), "--out", str(tmp_path / "s.csv")])
    assert code == 1
    assert "dimension" in capsys.readouterr().err.lower()


def test_numerical_failure_exit_2(tmp_path, capsys):
    # z1 = conj(z2) with eta tiny at Lambda = 0 makes I - mhat numerically singular
    out = tmp_path / "k.json"
    code = run(["dyson", "--d", "2", "--n", "2", "--z", "0+1e-14i", "--z2", "0-1e-14i", "--out", str(out)])
    assert code == 2
    diag = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert "error" in diag and "diagnostics" in diag
    assert not out.exists()


def test_io_error_exit_2(tmp_path):
    out = tmp_path / "missing_dir" / "x.csv"
    assert run(["spectrum", "--d", "2", "--n", "3", "--out", str(out)]) == 2


def test_gaps_schema_and_histogram(tmp_path):
    out, hist = tmp_path / "g.csv", tmp_path / "h.csv"
    assert run(["gaps", "--d", "2", "--n", "30", "--realizations", "2", "--hist-out", str(hist),
                "--out", str(out), "--deterministic"]) == 0
    meta, cols, rows = read_csv(out)
    assert cols == ["k", "lambda_k", "gap", "normalized_gap"]
    assert meta["config_hash"] and meta["seed"] == 0 and "timestamp" not in meta
    _, hcols, hrows = read_csv(hist)
    assert hcols == ["bin_left", "bin_right", "density", "ref_exponential", "ref_goe", "ref_gue"]
    assert len(hrows) == 50


@pytest.mark.parametrize("argv", [
    ["sample", "--d", "2", "--n", "3", "--matrix", "HLambda"],
    ["spectrum", "--d", "3", "--n", "5", "--a-scalar", "0.2"],
    ["que", "--d", "3", "--n", "5", "--realizations", "3"],
    ["twores", "--d", "2", "--n", "4", "--z1", "0.1+0.3i", "--z2", "0.1-0.3i", "--realizations", "3"],
    ["flow", "--d", "2", "--n", "2", "--a-scalar", "0.1", "--z0", "0.2+1i", "--points", "5"],
    ["sweep", "--d", "3", "--n", "6", "--lambda-exponents", "-1,-0.3", "--realizations", "2"],
])
def test_commands_deterministic(tmp_path, argv):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    fmt = ["--format", "json"]
    assert run(argv + fmt + ["--out", str(a), "--deterministic", "--threads", "1"]) == 0
    assert run(argv + fmt + ["--out", str(b), "--deterministic", "--threads", "3"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_sample_complex_encoding(tmp_path):
    out = tmp_path / "s.json"
    assert run(["sample", "--d", "2", "--n", "2", "--matrix", "H", "--out", str(out)]) == 0
    entries = np.array(_json(out)["data"]["entries"])
    assert entries.shape == (4, 4, 2)
    h = entries[..., 0] + 1j * entries[..., 1]
    np.testing.assert_array_equal(h, h.conj().T)
    assert np.all(h[:2, 2:] == 0)


def test_seed_changes_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    base = ["spectrum", "--d", "2", "--n", "4", "--deterministic"]
    run(base + ["--seed", "1", "--out", str(a)])
    run(base + ["--seed", "2", "--out", str(b)])
    assert a.read_bytes() != b.read_bytes()


def test_config_file_and_overrides(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"d": 2, "n": 4, "realizations": 2, "out": str(tmp_path / "f.csv")}))
    out = tmp_path / "flag.csv"
    assert run(["gaps", "--config", str(cfg_path), "--out", str(out), "--realizations", "3"]) == 0
    meta, _, _ = read_csv(out)
    assert meta["config"]["realizations"] == 3
    assert not (tmp_path / "f.csv").exists()
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"d": 2, "n": 4, "out": "x", "colour": 1}))
    assert run(["gaps", "--config", str(bad)]) == 1


def test_config_round_trip(tmp_path):
    cfg = build_config("twores", {}, {"d": "3", "n": "4", "z1": "0.1+0.2i", "z2": [0.1, -0.2], "out": "x.json",
                                       "a_scalar": "0.3"})
    path = tmp_path / "rt.json"
    path.write_text(json.dumps(normalized_form(cfg)))
    again = build_config("twores", load_config_file(path), {})
    assert normalized_form(again) == normalized_form(cfg)
    assert config_hash(again.to_dict()) == config_hash(cfg.to_dict())


def test_parse_complex_forms():
    assert parse_complex("0+1i") == 1j
    assert parse_complex("0.5-2j") == 0.5 - 2j
    assert parse_complex([1, -1]) == 1 - 1j
    assert parse_complex(3) == 3
    with pytest.raises((ValueError, ConfigError)):
        parse_complex("abc")


def test_emit_json_complex(tmp_path):
    out = tmp_path / "c.json"
    emit(Dataset("x", payload={"M": np.array([[1 + 2j, 0], [0, -1j]])}), "json", out, {"k": 1})
    assert _json(out)["data"]["M"] == [[[1.0, 2.0], [0.0, 0.0]], [[0.0, 0.0], [-0.0, -1.0]]]
    assert to_jsonable(np.complex128(1 - 1j)) == [1.0, -1.0]


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("BLOCKCHAOS_THREADS", "2")
    from blockchaos.parallel import default_threads
    assert default_threads() == 2
    monkeypatch.setenv("BLOCKCHAOS_THREADS", "zero")
    assert run(["spectrum", "--d", "2", "--n", "3", "--out", str(tmp_path / "s.csv")]) == 1


def test_console_module_entry(tmp_path):
    out = tmp_path / "m.json"
    proc = subprocess.run([sys.executable, "-m", "blockchaos", "dyson", "--d", "1", "--n", "1", "--z", "0+1i",
                           "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    m = complex(*_json(out)["data"]["solutions"][0]["m"])
    assert m == pytest.approx(solve_m(1j, InteractionSpec.zero(), 1, 1).m)
