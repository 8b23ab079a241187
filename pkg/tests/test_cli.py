import json
import subprocess
import sys

from p4te import cli
from p4te.network import Network

FAST = ["--set", "sim.duration_s=10", "--set", "sim.drain_s=100"]


def test_run_writes_outputs(tmp_path, capsys):
    code = cli.main(["run", "--scheme", "ecmp", "--load", "0.5", "--seed", "3", "--out", str(tmp_path), *FAST])
    assert code == cli.EXIT_OK
    (d,) = tmp_path.iterdir()
    assert d.name == "websearch_ecmp_load0.5_seed3"
    s = json.loads((d / "summary.json").read_text())
    assert (s["scheme"], s["load"], s["seed"]) == ("ecmp", 0.5, 3)
    assert "ecmp load=0.5 seed=3" in capsys.readouterr().out


def test_sweep_then_report(tmp_path):
    args = ["sweep", "--schemes", "ecmp,p4te", "--load", "0.4", "--load", "0.6", "--seeds", "1,2",
            "--out", str(tmp_path), *FAST]
    assert cli.main(args) == cli.EXIT_OK
    assert len(list(tmp_path.glob("*/summary.json"))) == 8
    first = (tmp_path / "aggregate.csv").read_text()
    assert len(first.splitlines()) == 1 + 4
    (tmp_path / "aggregate.csv").unlink()
    assert cli.main(["report", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert (tmp_path / "aggregate.csv").read_text() == first


def test_config_file_and_errors(tmp_path, capsys):
    good = tmp_path / "good.ini"
    good.write_text("[sim]\nduration_s = 5\ndrain_s = 50\n[experiment]\nscheme = hula\n")
    assert cli.main(["run", "--config", str(good), "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    assert (tmp_path / "o" / "websearch_hula_load0.8_seed1").is_dir()

    bad = tmp_path / "bad.ini"
    bad.write_text("[sim]\nduration_s = 5\nwarp = 9\n")
    assert cli.main(["run", "--config", str(bad)]) == cli.EXIT_CONFIG
    assert "bad.ini:3" in capsys.readouterr().err
    assert cli.main(["run", "--set", "p4te.delta=-1"]) == cli.EXIT_CONFIG
    assert cli.main(["run", "--load", "2"]) == cli.EXIT_CONFIG
    assert cli.main(["report", "--out", str(tmp_path / "empty")]) == cli.EXIT_CONFIG


def test_invariant_violation_exit_code(tmp_path, monkeypatch, capsys):
    real = Network.check_invariants

    def broken(self):
        checks = real(self)
        checks["conservation"] = False
        return checks

    monkeypatch.setattr(Network, "check_invariants", broken)
    assert cli.main(["run", "--out", str(tmp_path), *FAST]) == cli.EXIT_INVARIANT
    assert "conservation" in capsys.readouterr().err


def test_unknown_scheme_is_usage_error():
    assert cli.main(["run", "--scheme", "conga"]) == cli.EXIT_CONFIG
    assert cli.main(["bogus"]) == cli.EXIT_CONFIG
    assert cli.main(["--help"]) == cli.EXIT_OK


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "p4te", "run", "--scheme", "p4te", "--out", str(tmp_path),
                        "--set", "sim.duration_s=2", "--set", "sim.drain_s=30"],
                       capture_output=True, text=True, timeout=120)
    assert p.returncode == 0, p.stderr
    assert "p4te load=0.8 seed=1" in p.stdout
