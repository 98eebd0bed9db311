import json
import subprocess
import sys

from rhopomcpow.cli import main


def test_run_and_replay(tmp_path, capsys):
    cfg = {"problem": "light_dark", "planners": ["pomcpow"], "budgets": [5], "episodes": 2,
           "max_depth": 2, "filter_particles": 20}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "a")]) == 0
    assert capsys.readouterr().out.startswith("planner,budget,mean,stderr,n")
    assert main(["run", "--config", str(tmp_path / "a" / "manifest.json"),
                 "--out", str(tmp_path / "b"), "--workers", "2"]) == 0
    assert (tmp_path / "a" / "summary.csv").read_bytes() == \
        (tmp_path / "b" / "summary.csv").read_bytes()


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"problem": "maze", "planners": ["pomcpow"], "budgets": [5]}))
    assert main(["run", "--config", str(p)]) == 2
    assert "unknown problem" in capsys.readouterr().err
    assert main(["run", "--config", str(tmp_path / "missing.json")]) == 2


def test_bounds_and_oracle(tmp_path):
    cfg = tmp_path / "b.json"
    cfg.write_text(json.dumps({"t_values": [100, 1000]}))
    assert main(["bounds", "--config", str(cfg), "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "bounds.csv").exists()
    assert main(["oracle", "--which", "lvu", "--lvu-n", "500", "--out", str(tmp_path / "o")]) == 0
    assert "lvu" in json.loads((tmp_path / "o" / "oracle.json").read_text())


def test_profile_command(tmp_path):
    assert main(["profile", "--iterations", "40", "--out", str(tmp_path)]) == 0
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert meta["digest_match"] is True
    assert (tmp_path / "timings.csv").read_text().startswith("iteration,")


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "rhopomcpow", "--help"], capture_output=True,
                         text=True, check=True).stdout
    for sub in ("run", "profile", "bounds", "oracle"):
        assert sub in out
