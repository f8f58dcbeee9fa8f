import json

import numpy as np
import pytest

from spectra4 import cli
from spectra4.config import ConfigError, load_config, parse_config
from spectra4.report import Report, format_value, to_csv, to_json

MINIMAL = "[p]\n1 = 2, 0\n"


def write(tmp_path, text, name="run.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_defaults():
    cfg = parse_config(MINIMAL)
    assert cfg.p_terms == ((1, 2.0, 0.0),) and cfg.q_terms == ()
    assert cfg.engine == "galerkin" and cfg.modes is None
    assert cfg.tolerances.crosscheck_tol == 1e-7
    d = cfg.to_dict()
    assert "output" not in d and d["tolerances"]["z_max"] == 26.0


def test_full_config():
    text = """
[p]
0 = 1.5, 0
1 = 2, 0.5   # inline comment
[q]
2 = 0, 1
[run]
n_min = 2
n_max = 12
modes = 80
engine = both
format = json
root_tol = 1e-9
"""
    cfg = parse_config(text)
    assert cfg.n_min == 2 and cfg.n_max == 12 and cfg.modes == 80
    assert cfg.engine == "both" and cfg.format == "json"
    assert cfg.tolerances.root_tol == 1e-9
    spec = cfg.spec()
    assert spec.p.coeff(0) == 1.5 and spec.q.coeff(2) == pytest.approx(-0.5j)


def test_q_mean_rejected_with_line():
    with pytest.raises(ConfigError, match=r":4: q must have zero mean"):
        parse_config("[p]\n1 = 2, 0\n[q]\n0 = 3, 0\n")
    # a sine amplitude on m = 0 multiplies sin 0 and is harmless
    assert parse_config("[q]\n0 = 0, 3\n").spec().q.degree == 0


@pytest.mark.parametrize(
    "text,match",
    [
        ("[p]\n1 = 2, 0\n1 = 1, 0\n", r":3: duplicate"),
        ("[p]\nx = 2, 0\n", r":2: harmonic index"),
        ("[p]\n1 = 2\n", r":2: expected"),
        ("[p]\n1 = a, 0\n", r":2: amplitudes"),
        ("[p]\n-1 = 1, 0\n", r">= 0"),
        ("1 = 2, 0\n", r":1: content before"),
        ("[run]\nn_max = ten\n", r":2: bad value"),
        ("[run]\nfoo = 1\n", r":2: unknown key"),
        ("[run]\nengine = magic\n", r"engine must be"),
        ("[extra]\n", r"unknown section"),
        ("[p]\n1 = inf, 0\n", r"finite"),
    ],
)
def test_config_errors(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text, source="cfg")


def test_load_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "nope.ini")


def test_overrides_validate():
    cfg = parse_config(MINIMAL)
    assert cfg.with_overrides(n_max=4, engine=None).n_max == 4
    with pytest.raises(ConfigError):
        cfg.with_overrides(engine="bogus")


def test_format_value():
    assert format_value(1.0) == "1.0000000000000000e+00"
    assert format_value(True) == "true" and format_value(3) == "3"
    assert format_value(None) == "" and format_value(float("nan")) == "nan"
    x = 0.1 + 0.2
    assert float(format_value(x)) == x


def test_csv_layout():
    rep = Report("spectrum", ["n", "value"], rows=[{"n": 1, "value": 2.5}], config={"a": 1})
    text = to_csv(rep)
    assert text.splitlines() == ["# spectra4 spectrum", '# config: {"a":1}', "n,value", "1,2.5000000000000000e+00"]
    assert "\r" not in text
    doc = json.loads(to_json(rep))
    assert set(doc) == {"command", "config", "rows", "errors", "summary"}


def run_cli(tmp_path, command, text, *extra):
    cfg = write(tmp_path, text)
    out = tmp_path / f"{command}.out"
    code = cli.main([command, "--config", str(cfg), "--out", str(out), *extra])
    return code, out.read_text() if out.exists() else ""


def test_spectrum_free_csv(tmp_path):
    code, text = run_cli(tmp_path, "spectrum", "[run]\nn_max = 3\n")
    assert code == 0
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "n,sector,sign,value,engine,estimate"
    vals = [float(l.split(",")[3]) for l in lines[1:]]
    assert vals[1:] == pytest.approx([(np.pi * n) ** 4 for n in (1, 1, 2, 2, 3, 3)], rel=1e-12)


def test_spectrum_both_engines(tmp_path):
    code, text = run_cli(tmp_path, "spectrum", "[p]\n1 = 1, 0\n[run]\nn_max = 2\nengine = both\n", "--format", "json")
    assert code == 0
    doc = json.loads(text)
    assert {r["engine"] for r in doc["rows"]} == {"galerkin", "monodromy"}
    assert len(doc["rows"]) == 10


def test_identities_command(tmp_path):
    code, text = run_cli(tmp_path, "identities", "[p]\n1 = 2, 0\n[q]\n2 = 1, 0\n", "--format", "json")
    doc = json.loads(text)
    assert code == 0 and doc["summary"]["passed"]
    assert all(r["residual"] <= 1e-13 for r in doc["rows"] if r["z"] is None)
    assert doc["summary"]["qd_scaled_ratio"] < 4


def test_gaps_command_cancellation(tmp_path):
    text = "[p]\n1 = %r, 0\n[q]\n1 = 1, 0\n[run]\nn_max = 4\n" % (-1 / (2 * np.pi**2))
    code, out = run_cli(tmp_path, "gaps", text)
    assert code == 0
    row1 = [l for l in out.splitlines() if l.startswith("1,")][0]
    assert row1.endswith("correct-formula")


def test_crosscheck_and_monodromy_commands(tmp_path):
    text = "[p]\n1 = 1, 0\n[q]\n2 = 0, 1\n[run]\nn_max = 3\n"
    code, out = run_cli(tmp_path, "crosscheck", text, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["max_rel_dev"] <= 1e-7
    assert not doc["summary"]["sector_mismatches"]
    code, out = run_cli(tmp_path, "monodromy", text, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["max_det_defect"] <= 1e-9


def test_monodromy_guard_is_engine_error(tmp_path):
    code, out = run_cli(tmp_path, "monodromy", "[p]\n1 = 2, 0\n[run]\nn_max = 50\n", "--format", "json")
    doc = json.loads(out)
    assert code == 1
    assert "z_max" in doc["errors"][0] and "too large" in doc["errors"][0]


def test_predict_residuals_square(tmp_path):
    text = "[p]\n1 = 2, 0\n[q]\n2 = 1, 0\n[run]\nn_min = 8\nn_max = 32\n"
    code, out = run_cli(tmp_path, "predict", text)
    assert code == 0 and out.count("\n") == 2 + 1 + 25
    code, out = run_cli(tmp_path, "residuals", text, "--format", "json")
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["slope"] <= -1.2 and doc["summary"]["trend_ok"]
    code, out = run_cli(tmp_path, "square-check", "[p]\n1 = 2, 0\n[run]\nn_max = 20\nmodes = 256\n")
    assert code == 0


def test_failed_check_exits_one(tmp_path):
    code, _ = run_cli(tmp_path, "square-check", "[p]\n1 = 2, 0\n[run]\nn_max = 6\nsquare_tol = 0\n")
    assert code == 1


def test_config_error_exits_two(tmp_path, capsys):
    code, _ = run_cli(tmp_path, "spectrum", "[q]\n0 = 1, 0\n")
    assert code == 2
    assert "zero mean" in capsys.readouterr().err


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("SPECTRA4_THREADS", "many")
    code, _ = run_cli(tmp_path, "spectrum", MINIMAL)
    assert code == 2


def test_threads_do_not_change_output(tmp_path, monkeypatch):
    text = "[p]\n1 = 1, 0\n[q]\n2 = 0, 1\n[run]\nn_max = 12\n"
    _, a = run_cli(tmp_path, "spectrum", text)
    monkeypatch.setenv("SPECTRA4_THREADS", "4")
    _, b = run_cli(tmp_path, "spectrum", text)
    assert a == b


def test_stdout_when_no_output(tmp_path, capsys):
    cfg = write(tmp_path, "[run]\nn_max = 1\n")
    assert cli.main(["predict", "--config", str(cfg)]) == 0
    assert capsys.readouterr().out.startswith("# spectra4 predict\n")


def test_usage_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        cli.main(["nonsense", "--config", "x"])
    assert exc.value.code == 2


def test_both_engines_keep_galerkin_rows_past_guard(tmp_path):
    code, out = run_cli(tmp_path, "spectrum", "[p]\n1 = 1, 0\n[run]\nn_max = 12\nengine = both\n", "--format", "json")
    doc = json.loads(out)
    assert code == 1
    assert len(doc["rows"]) == 25 and "monodromy" in doc["errors"][0]
