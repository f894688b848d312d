import json
import subprocess
import sys

import pytest

from levy_tails.cli import ConfigError, main, parse_config, parse_law

THM1 = """
[experiment]
id = thm1
u = 2,4,6
trials = 1000000
seed = 42

[model]
sigma = 1
b = 0
lambda = 1
law = half-normal
"""


def test_parse_minimal_config():
    cfg = parse_config(THM1)
    assert cfg.experiment == "thm1"
    assert cfg.u_grid == [2.0, 4.0, 6.0]
    assert cfg.trials == 1_000_000 and cfg.seed == 42


def test_config_collects_all_errors():
    bad = THM1.replace("lambda = 1", "lambda = -1").replace("half-normal", "factorial v=0.5") + "\nfoo = 3\n"
    with pytest.raises(ConfigError) as e:
        parse_config(bad)
    msgs = " | ".join(e.value.errors)
    assert "lambda must be positive" in msgs
    assert "v ≥ 1 required" in msgs
    assert "unknown key 'foo'" in msgs


def test_config_rejects_unknown_experiment_and_non_numeric():
    with pytest.raises(ConfigError) as e:
        parse_config(THM1.replace("id = thm1", "id = thm9").replace("sigma = 1", "sigma = abc"))
    msgs = " | ".join(e.value.errors)
    assert "unknown experiment id" in msgs and "sigma" in msgs


def test_law_descriptors():
    assert parse_law("exponential rate=2").tail(1.0) == pytest.approx(2.718281828**-2, rel=1e-8)
    assert parse_law("discrete values=1,2 probs=0.25,0.75").tail(1.0) == pytest.approx(0.75)
    assert parse_law("half-normal step=0.25").is_discrete
    with pytest.raises(ValueError):
        parse_law("half-normal bogus")
    with pytest.raises(ValueError):
        parse_law("nonsense")


def test_verify_writes_three_files(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(THM1.replace("u = 2,4,6", "u = 1,2"))
    code = main(["verify", "thm1", str(cfg), "--trials", "200000", "--outdir", str(tmp_path / "o")])
    assert code in (0, 2, 3)
    files = sorted(p.name for p in (tmp_path / "o").iterdir())
    assert files == ["manifest.json", "report.json", "table.csv"]
    manifest = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert set(manifest["digests"]) == {"table.csv", "report.json"}
    assert manifest["tolerances"]["tol"] > 0
    header = (tmp_path / "o" / "table.csv").read_text().splitlines()[0]
    assert header == "experiment,u,numerator,numerator_err,denominator,denominator_err,ratio,ratio_lo,ratio_hi,method"


def test_too_few_trials_exit_3(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(THM1)
    assert main(["verify", "thm1", str(cfg), "--trials", "10", "--outdir", str(tmp_path)]) == 3


def test_single_negative_u_exit_0(tmp_path):
    cfg = tmp_path / "c.ini"
    cfg.write_text(
        "[experiment]\nid = thm2\nu = -1\ntrials = 1000\n[model]\nsigma = 0\nb = 0.5\nlambda = 1\nlaw = half-normal\n"
    )
    assert main(["verify", "thm2", str(cfg), "--outdir", str(tmp_path)]) == 0
    row = (tmp_path / "table.csv").read_text().splitlines()[1].split(",")
    assert float(row[6]) == 1.0


def test_bad_config_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(THM1.replace("lambda = 1", "lambda = -1"))
    assert main(["verify", "thm1", str(cfg)]) == 1
    assert "lambda must be positive" in capsys.readouterr().err
    assert main(["verify", "thm1", str(tmp_path / "missing.ini")]) == 1


def test_classify_output(capsys):
    assert main(["classify", "half-normal"]) == 0
    assert "cond_pl = true" in capsys.readouterr().out
    assert main(["classify", "exponential"]) == 0
    out = capsys.readouterr().out
    assert "cond_pl = false" in out and "light1 = true" in out
    assert main(["classify", "point", "value=1"]) == 0
    assert "light2 = true" in capsys.readouterr().out


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "levy_tails", "classify", "uniform"], capture_output=True, text=True)
    assert res.returncode == 0 and "light2 = true" in res.stdout


def test_ratio_command(capsys):
    assert main(["ratio", "--sigma", "1", "--law", "pm value=1", "--u", "0.5", "1.5", "--trials", "50000"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("experiment,u") and len(lines) == 3
