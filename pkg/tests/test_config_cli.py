import json
import os

import numpy as np
import pytest

from fellerx.cli import run
from fellerx.config import load, loads
from fellerx.errors import ConfigError
from fellerx.expr import ExpressionError, parse

HERE = os.path.dirname(__file__)
CONFIGS = os.path.join(HERE, "..", "configs")

BASE = """\
name: t
spec:
  interval: [0, 1]
  scale: "x"
  speed: "2*x"
boundary:
  a: {p2: 1, p3: 1}
  b: {q2: 1, q3: 1}
task:
  r: 0.5
  g: "1"
"""


def cfg_path(name):
    return os.path.join(CONFIGS, name)


# ------------------------------------------------------------------ expressions

@pytest.mark.parametrize("text,x,want", [
    ("x^2 + 1", 2.0, 5.0),
    ("exp(-x) * sin(pi*x)", 0.5, np.exp(-0.5)),
    ("pow(x, 3) - sqrt(x)", 4.0, 62.0),
    ("abs(x) + log(e)", -2.0, 3.0),
    ("cosh(x) - sinh(x)", 1.0, np.exp(-1.0)),
])
def test_expression_values(text, x, want):
    assert parse(text)(x) == pytest.approx(want, rel=1e-14)


def test_expression_vectorised():
    f = parse("2*x")
    np.testing.assert_allclose(f(np.array([0.0, 0.5, 1.0])), [0.0, 1.0, 2.0])


@pytest.mark.parametrize("text", ["__import__('os')", "x.real", "y + 1", "exp(x, 2)",
                                  "[x]", "x +", "lambda: 1"])
def test_expression_rejects(text):
    with pytest.raises(ExpressionError):
        parse(text)


# ------------------------------------------------------------------ config errors

def test_loads_base():
    cfg = loads(BASE)
    assert cfg.task.r == [0.5]
    assert cfg.data.p2 == 1 and cfg.data.q3 == 1
    assert cfg.spec.classes[0].kind == "Regular"


def _error(text):
    with pytest.raises(ConfigError) as info:
        loads(text)
    return info.value


def test_unknown_key_has_line():
    err = _error(BASE.replace("  g: \"1\"\n", "  g: \"1\"\n  colour: red\n"))
    assert err.details["line"] == 12
    assert "colour" in str(err)
    assert err.to_dict()["code"] == "cli.config_error"


def test_bad_expression_has_line():
    err = _error(BASE.replace('speed: "2*x"', 'speed: "2*y"'))
    assert err.details["line"] == 5


def test_duplicate_key():
    err = _error(BASE.replace("  r: 0.5\n", "  r: 0.5\n  r: 1\n"))
    assert err.details["line"] == 11
    assert "duplicate" in str(err)


def test_yaml_syntax_error():
    err = _error(BASE.replace("a: {p2: 1, p3: 1}", "a: {p2: 1, p3: 1"))
    assert "line" in err.details


@pytest.mark.parametrize("bad", ["interval: [1, 0]", "interval: [0]", "interval: zero"])
def test_bad_interval(bad):
    err = _error(BASE.replace("interval: [0, 1]", bad))
    assert err.details["line"] == 3


def test_negative_rate_reaches_validation(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(BASE.replace("p2: 1,", "p2: -1,"))
    assert run(["validate", "--config", str(p), "--out", str(tmp_path)]) == 2
    assert json.loads(capsys.readouterr().out)["passed"] is False


def test_missing_spec():
    with pytest.raises(ConfigError):
        loads("task: {r: 1}\n")


def test_load_all_shipped_configs():
    for name in sorted(os.listdir(CONFIGS)):
        if name.endswith(".yaml"):
            load(cfg_path(name))


# ------------------------------------------------------------------ CLI

def test_classify_prints_json(tmp_path, capsys):
    code = run(["classify", "--config", cfg_path("bm_sticky_both.yaml"), "--out", str(tmp_path)])
    assert code == 0
    assert json.loads(capsys.readouterr().out) == {"a": "Regular", "b": "Regular"}
    side = json.loads((tmp_path / "classify.json").read_text())
    assert side["details"]["a"]["accessible"] is True


def test_classify_natural(tmp_path, capsys):
    assert run(["classify", "--config", cfg_path("classify_natural.yaml"),
                "--out", str(tmp_path)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert "Natural" in out.values()


def test_validate_fails_pcond2(tmp_path, capsys):
    code = run(["--config", cfg_path("killed_only_fails_pcond2.yaml"), "--out", str(tmp_path)])
    assert code == 2
    out = json.loads(capsys.readouterr().out)
    assert out["passed"] is False and "pcond2" in out["failed"]
    rep = json.loads((tmp_path / "validate.json").read_text())
    assert any(c["name"] == "pcond2" and not c["passed"] for c in rep["checks"])


def test_resolve_refuses_invalid_data(tmp_path, capsys):
    code = run(["resolve", "--config", cfg_path("bm_sticky_killed.yaml"), "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == "feller_bc.invalid_boundary_data"
    assert "qcond2" in err["details"]["failed"]
    assert (tmp_path / "error.json").exists()


def test_config_error_exit_one(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text(BASE.replace("g: \"1\"", "g: \"1 +\""))
    code = run(["resolve", "--config", str(bad), "--out", str(tmp_path / "o")])
    assert code == 1
    err = json.loads(capsys.readouterr().err)
    assert err["code"] == "cli.config_error" and err["details"]["line"] == 11
    assert json.loads((tmp_path / "o" / "error.json").read_text()) == err


def test_missing_command(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(BASE)
    assert run(["--config", str(p), "--out", str(tmp_path)]) == 1


def test_bad_flag_values(tmp_path, capsys):
    c = cfg_path("bm_sticky_both.yaml")
    assert run(["resolve", "--config", c, "--out", str(tmp_path), "--nodes", "2"]) == 1
    assert run(["resolve", "--config", c, "--out", str(tmp_path), "--eps", "0"]) == 1
    with pytest.raises(SystemExit):
        run(["resolve", "--config", c, "--r", "-1"])


def test_resolve_three_oracles_agree(tmp_path, capsys):
    code = run(["resolve", "--config", cfg_path("bm_sticky_both.yaml"), "--out", str(tmp_path),
                "--r", "0.5", "--also-oracle", "--also-mc", "--paths", "20000", "--seed", "3"])
    assert code == 0
    out = json.loads(capsys.readouterr().out)["r0.5"]
    assert set(out["values"]) == {"analytic", "grid", "mc"}
    assert all(p["agree"] for p in out["agreement"].values())
    # conservative: R 1 = 1/r
    assert out["values"]["analytic"] == pytest.approx(2.0, abs=1e-8)


def test_resolve_csv_round_trip(tmp_path, capsys):
    c = cfg_path("bm_sticky_both.yaml")
    p = tmp_path / "c.yaml"
    p.write_text(open(c).read().replace('g: "1"', 'g: "1 + sin(3*x)"'))
    assert run(["resolve", "--config", str(p), "--out", str(tmp_path), "--nodes", "501"]) == 0
    rows = np.loadtxt(tmp_path / "resolve_r0.5.csv", delimiter=",", skiprows=1)
    assert rows.shape[1] == 2
    assert rows[0, 0] == 0.0 and rows[-1, 0] == 1.0
    side = json.loads((tmp_path / "resolve_r0.5.json").read_text())
    assert side["values"]["analytic"] == pytest.approx(rows[0, 1], rel=1e-11)


def test_resolve_minimal(tmp_path, capsys):
    assert run(["resolve", "--config", cfg_path("bm_sticky_both.yaml"), "--out", str(tmp_path),
                "--minimal", "--x0", "0.5"]) == 0
    side = json.loads((tmp_path / "resolve_r0.5.json").read_text())
    assert side["minimal"]["value"] == pytest.approx(0.226362, abs=1e-5)
    assert side["minimal"]["limit_a"] == pytest.approx(0.0, abs=1e-9)


def test_eigen_outputs(tmp_path, capsys):
    assert run(["eigen", "--config", cfg_path("bm_sticky_both.yaml"), "--out", str(tmp_path),
                "--r", "0.5,2"]) == 0
    for tag in ("r0.5", "r2"):
        assert (tmp_path / f"eigen_{tag}.csv").exists()
        side = json.loads((tmp_path / f"eigen_{tag}.json").read_text())
        assert side["wronskian_residual"] < 1e-8


def _run_twice(tmp_path, argv):
    outs = []
    for k in range(2):
        d = tmp_path / f"run{k}"
        assert run(argv + ["--out", str(d)]) == 0
        outs.append({f: (d / f).read_bytes() for f in sorted(os.listdir(d))})
    return outs


def test_simulate_byte_identical(tmp_path, capsys):
    a, b = _run_twice(tmp_path, ["simulate", "--config", cfg_path("bm_sticky_both.yaml"),
                                 "--paths", "2000", "--seed", "11", "--write-paths", "3",
                                 "--horizon", "2"])
    assert a.keys() == b.keys() == {"paths.csv", "estimates.json"}
    assert a == b
    est = json.loads(a["estimates.json"])
    for row in est["stagnancy_bookkeeping"]:
        assert row["stagnant_time_a"] == row["local_time_a"] * 1.0


def test_simulate_seed_changes_output(tmp_path, capsys):
    argv = ["simulate", "--config", cfg_path("bm_sticky_both.yaml"), "--paths", "500",
            "--write-paths", "1", "--horizon", "1"]
    assert run(argv + ["--seed", "1", "--out", str(tmp_path / "s1")]) == 0
    assert run(argv + ["--seed", "2", "--out", str(tmp_path / "s2")]) == 0
    assert (tmp_path / "s1" / "paths.csv").read_bytes() != (tmp_path / "s2" / "paths.csv").read_bytes()


def test_numbers_have_twelve_digits(tmp_path, capsys):
    assert run(["resolve", "--config", cfg_path("half_line.yaml"), "--out", str(tmp_path),
                "--nodes", "501"]) == 0
    text = (tmp_path / "resolve_r0.5.csv").read_text().splitlines()[1:20]
    for line in text:
        for field in line.split(","):
            mant = field.lower().split("e")[0].replace("-", "").replace(".", "").lstrip("0")
            assert len(mant) <= 12


def test_check_domain_cli(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    p.write_text(open(cfg_path("bm_sticky_both.yaml")).read().replace('g: "1"', 'g: "cos(2*x)"'))
    assert run(["check-domain", "--config", str(p), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "check_domain.json").read_text())
    assert rep["r0.5"]["verdict"] is True


def test_check_domain_rejects_non_member(tmp_path, capsys):
    p = tmp_path / "c.yaml"
    text = open(cfg_path("bm_sticky_both.yaml")).read().replace('g: "1"\n', 'f: "x"\n  Lf: "0"\n')
    p.write_text(text)
    assert run(["check-domain", "--config", str(p), "--out", str(tmp_path)]) == 2
