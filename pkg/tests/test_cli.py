import json

import pytest

from artifact.cli import OUT_ENV, SCHEMA, config_hash, run


def _manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_stokes_trivial_wave(tmp_path):
    assert run(["--out", str(tmp_path), "stokes", "--ell", "1", "--eps", "0"]) == 0
    rows = (tmp_path / "stokes.csv").read_text().splitlines()
    assert rows[0] == "eps,mu,residual,min_taylor,min_abs_V1"
    assert float(rows[1].split(",")[2]) == 0.0
    m = _manifest(tmp_path)
    assert m["status"] == "ok" and set(m["outputs"]) == {"stokes.csv", "stokes.json", "stokes_eps0.json"}


def test_divisor_scan_wraps_scan_condition(tmp_path):
    assert run(["--out", str(tmp_path), "divisors", "scan", "--nu", "sqrt(2)", "--delta", "0.5",
                "--k1max", "10000"]) == 0
    d = json.loads((tmp_path / "divisors_scan.json").read_text())
    assert d["pass"] and d["violations"] == []
    # a rational truncation of sqrt 2 resonates at multiples of its denominator's root
    assert run(["--out", str(tmp_path), "divisors", "scan", "--nu", "1.41421356", "--k1max", "10000"]) == 0
    d = json.loads((tmp_path / "divisors_scan.json").read_text())
    assert [5000, 35355339] in [v[:2] for v in d["violations"]]


def test_same_config_and_seed_are_byte_identical(tmp_path):
    args = ["--seed", "5", "paralin", "--n", "32", "--eps", "0.02,0.04"]
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["--out", str(a)] + args) == 0 and run(["--out", str(b)] + args) == 0
    for name in ("paralin.csv", "paralin_bands.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert 1.8 < json.loads((a / "paralin.json").read_text())["slope"] < 2.2


def test_config_hash_tracks_semantic_parameters():
    base = {"subcommand": "dtn", "eps": 0.05, "n": 32, "seed": 0}
    assert config_hash(base) == config_hash(dict(base, out="/elsewhere"))
    assert config_hash(base) != config_hash(dict(base, eps=0.06))
    assert config_hash(base) != config_hash(dict(base, seed=1))


def test_json_config_mirrors_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "stokes", "eps": [0.0, 0.02], "n": 16}))
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out)]) == 0
    m = _manifest(out)
    assert m["config"]["eps"] == [0.0, 0.02] and m["config"]["n"] == 16
    # an explicit flag overrides the file
    assert run(["--config", str(cfg), "--out", str(out), "stokes", "--n", "32"]) == 0
    assert _manifest(out)["config"]["n"] == 32


@pytest.mark.parametrize("text", ["{bad", "[1, 2]", json.dumps({"subcommand": "dtn", "bogus": 1})])
def test_corrupted_config_is_usage_error_without_writes(tmp_path, text, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(text)
    out = tmp_path / "o"
    assert run(["--config", str(cfg), "--out", str(out), "dtn"]) == 2
    assert not out.exists()
    assert "error" in capsys.readouterr().err


def test_invalid_parameters_are_usage_errors(tmp_path):
    out = tmp_path / "o"
    assert run(["--out", str(out), "dtn", "--n", "48"]) == 2
    assert run(["--out", str(out), "stokes", "--eps", "0.5"]) == 2
    assert run(["--out", str(out), "divisors", "scan", "--delta", "1.5"]) == 2
    assert not out.exists()
    with pytest.raises(SystemExit):
        run(["--out", str(out), "paralin", "--eps", "x,y"])


def test_env_var_sets_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(OUT_ENV, str(tmp_path / "env"))
    assert run(["dtn", "--n", "16", "--nz", "12"]) == 0
    assert (tmp_path / "env" / "dtn_trace.csv").exists()


def test_schema_dump(capsys):
    assert run(["--schema"]) == 0
    assert json.loads(capsys.readouterr().out) == SCHEMA


def test_suite_exit_status(tmp_path):
    assert run(["--out", str(tmp_path / "ok"), "suite", "--only", "2"]) == 0
    # the linear Taylor envelope is a measured failure, so the suite exits non-zero
    assert run(["--out", str(tmp_path / "bad"), "suite", "--only", "2,5"]) == 1
    m = _manifest(tmp_path / "bad")
    assert m["status"] == "criteria_failed"
    rows = (tmp_path / "bad" / "suite.csv").read_text().splitlines()
    assert rows[1:] == ["2,factorization identity,1", "5,Taylor sign,0"]


def test_conjugate_with_cascades(tmp_path):
    assert run(["--out", str(tmp_path), "--seed", "3", "conjugate", "--n", "32", "--eps", "0",
                "--cascades", "2"]) == 0
    d = json.loads((tmp_path / "conjugate.json").read_text())
    assert abs(d["pack"]["nu"] - d["inverse_mu"]) < 1e-10
    assert len((tmp_path / "cascade.csv").read_text().splitlines()) == 3
