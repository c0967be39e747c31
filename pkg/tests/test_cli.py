import json
import shutil
import subprocess

import pytest

from prandtl_lab import cli
from prandtl_lab.errors import ConfigError


@pytest.fixture(autouse=True)
def _no_env(monkeypatch):
    monkeypatch.delenv(cli.OUT_ENV, raising=False)


def test_list_checks(capsys):
    assert cli.main(["list-checks"]) == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 10
    assert cli.main(["list-checks", "--json"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert len(rows) == 10 and all({"id", "description", "anchor"} <= set(r) for r in rows)


def test_bundled_regression_and_rerun(tmp_path, capsys):
    assert cli.main(["march", "--config", "blasius_regression", "--out", str(tmp_path / "a")]) == 0
    out = tmp_path / "a" / "blasius_regression"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["checks"]["exact_error"]["value"] <= 5e-3
    assert summary["checks"]["envelope"]["passed"]
    for name in ("stations.csv", "reports.json", "profile.json"):
        assert (out / name).exists()
    assert cli.main(["march", "--config", "blasius_regression", "--out", str(tmp_path / "b")]) == 0
    again = tmp_path / "b" / "blasius_regression"
    assert (out / "stations.csv").read_bytes() == (again / "stations.csv").read_bytes()


def test_output_env_overrides(tmp_path, monkeypatch, capsys):
    cfg = cli.load_config("blasius_regression")[0]
    cfg["march"] = {"X_end": 3, "n_nodes": 256}
    cfg["checks"] = {}
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["march", "--config", str(path), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "env" / "blasius_regression" / "stations.csv").exists()
    assert not (tmp_path / "flag").exists()


@pytest.mark.parametrize("bad", [
    {"name": "x"},
    {"name": "x", "profile": {"kind": "nonsense"}},
    {"name": "x", "profile": {"kind": "blasius"}, "march": {"n_nodes": 10}},
    {"name": "x", "profile": {"kind": "blasius"}, "march": {"X_end": -1}},
])
def test_malformed_config_exit_code(tmp_path, bad, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert cli.main(["march", "--config", str(path), "--out", str(tmp_path)]) == 2


def test_validate_config_direct():
    with pytest.raises(ConfigError):
        cli.validate_config({"profile": {"kind": "blasius"}})
    cli.validate_config(cli.load_config("sharp_rate_uA")[0])


@pytest.mark.slow
def test_sharp_rate_config(tmp_path, capsys):
    assert cli.main(["march", "--config", "sharp_rate_uA", "--out", str(tmp_path)]) == 0
    fits = json.loads((tmp_path / "sharp_rate_uA" / "slopes.json").read_text())
    assert all(-1.1 <= f["slope"] <= -0.9 for f in fits.values())


def test_blasius_command(tmp_path, capsys):
    assert cli.main(["blasius", "--out", str(tmp_path), "--json"]) == 0
    info = json.loads(capsys.readouterr().out)
    assert abs(info["fpp0"] - 0.332057336) < 1e-8
    assert (tmp_path / "blasius.csv").exists()


def test_spectrum_command(tmp_path, capsys):
    assert cli.main(["spectrum", "--nodes", "1024", "--out", str(tmp_path), "--json"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert abs(res["eigenvalue"] - 1.0) <= 0.05 and res["positive"]
    assert (tmp_path / "eigenpair.csv").read_text().startswith("Y,eigvec,analytic")


def test_accept_subset(capsys):
    assert cli.main(["accept", "--checks", "blasius_shooting"]) == 0
    assert "[PASS] blasius_shooting" in capsys.readouterr().out


@pytest.mark.skipif(shutil.which("prandtl-lab") is None, reason="entry point not installed")
def test_console_script():
    proc = subprocess.run(["prandtl-lab", "list-checks"], capture_output=True, text=True)
    assert proc.returncode == 0 and "spectral_eigenpair" in proc.stdout
