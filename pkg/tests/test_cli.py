import json
import subprocess
import sys
from pathlib import Path

import pytest

from trimwave.cli import main, resolve_threads, write_atomic
from trimwave.errors import ConfigurationError

CONFIGS = Path(__file__).parent / "data" / "configs"
SHIPPED = Path(__file__).parent.parent / "src" / "trimwave" / "configs"


def run_cli(tmp_path, name, *extra, subdir="out"):
    out = tmp_path / subdir
    code = main(["run", "--config", str(CONFIGS / f"{name}.json"), "--output", str(out), *extra])
    return code, out


def checksums(out):
    return {a["path"]: a["sha256"] for a in json.loads((out / "manifest.json").read_text())["artifacts"]}


def test_write_atomic(tmp_path):
    digest = write_atomic(tmp_path / "a" / "b.txt", "hello")
    assert (tmp_path / "a" / "b.txt").read_text() == "hello"
    assert digest == "2cf24dba5fb0a30e26e83b2ac5b9e29e1b161e5c1fa7425e73043362938b9824"
    assert [p.name for p in (tmp_path / "a").iterdir()] == ["b.txt"]


def test_resolve_threads(monkeypatch):
    monkeypatch.delenv("TRIMWAVE_THREADS", raising=False)
    assert resolve_threads(None) == 1
    monkeypatch.setenv("TRIMWAVE_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    monkeypatch.setenv("TRIMWAVE_THREADS", "many")
    with pytest.raises(ConfigurationError):
        resolve_threads(None)


@pytest.mark.parametrize("name, files", [
    ("spectrum", {"spectrum.csv", "summary.json", "potential_r0.csv", "operator_r0.txt"}),
    ("endpoints", {"endpoints.json"}),
    ("extended", {"extended.csv", "states.csv", "summary.json"}),
    ("ucp", {"ucp.csv", "ucp.json"}),
])
def test_run_passes(tmp_path, capsys, name, files):
    code, out = run_cli(tmp_path, name)
    assert code == 0
    written = {p.name for p in out.iterdir()}
    assert files <= written and "manifest.json" in written
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] and manifest["schema"] == 1 and manifest["seed"] is not None
    assert set(checksums(out)) == written - {"manifest.json"}
    assert "PASS" in capsys.readouterr().out


def test_ucp_csv_header(tmp_path):
    code, out = run_cli(tmp_path, "ucp")
    assert (out / "ucp.csv").read_text().splitlines()[0] == "n,E,gamma,lhs,rhs,pass"


def test_spectrum_rerun_and_threads_identical(tmp_path):
    _, a = run_cli(tmp_path, "spectrum", subdir="a")
    _, b = run_cli(tmp_path, "spectrum", "--threads", "3", subdir="b")
    assert checksums(a) == checksums(b)


def test_env_threads_recorded(tmp_path, monkeypatch):
    monkeypatch.setenv("TRIMWAVE_THREADS", "2")
    _, out = run_cli(tmp_path, "endpoints")
    assert json.loads((out / "manifest.json").read_text())["threads"] == 2


@pytest.mark.parametrize("name, fragment", [
    ("extended_odd", "odd"),
    ("wegner_inside", "gamma_floor"),
    ("bad_period", "line 6: geometry/periods/0: 1 is less than the minimum of 2"),
    ("unknown_key", "line 7"),
])
def test_run_config_errors_exit_2(tmp_path, capsys, name, fragment):
    code, out = run_cli(tmp_path, name)
    assert code == 2 and not out.exists()
    assert fragment in capsys.readouterr().err


def test_failed_assertion_exits_1(tmp_path, capsys):
    code, out = run_cli(tmp_path, "wegner_small")
    assert code == 1
    assert json.loads((out / "manifest.json").read_text())["passed"] is False
    assert "FAIL" in capsys.readouterr().out


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "none.json")]) == 2


def test_validate_subcommand(capsys):
    assert main(["validate", "--config", str(CONFIGS / "spectrum.json")]) == 0
    assert main(["validate", "--config", str(CONFIGS / "bad_period.json")]) == 2
    assert main(["run", "--validate", "--config", str(CONFIGS / "extended_odd.json")]) == 2
    assert "odd" in capsys.readouterr().err


def test_console_script_version():
    res = subprocess.run([sys.executable, "-m", "trimwave.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("trimwave ")


@pytest.mark.slow
def test_shipped_mobility_scan(tmp_path):
    out = tmp_path / "mob"
    assert main(["run", "--config", str(SHIPPED / "mobility_p2.json"), "--output", str(out)]) == 0
    rows = (out / "mobility.csv").read_text().splitlines()
    assert len(rows) - 1 >= 41
