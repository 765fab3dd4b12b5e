import json

import pytest

from excessrisk import cli
from excessrisk.config import parse_config
from excessrisk.errors import ConfigurationError


class TestParseConfig:
    def test_minimal_defaults(self):
        cfg = parse_config('subcommand = "audit"\n[audit]\nscheme = "svm"\n')
        assert cfg.trials == 200 and cfg.delta == 0.05
        assert cfg.audit["scheme"] == "svm" and cfg.audit["samples"] == 200

    def test_n_grid_not_increasing(self):
        with pytest.raises(ConfigurationError, match="n_grid not increasing"):
            parse_config('subcommand = "audit"\nn_grid = [400, 200]\n')

    def test_suggests_epsilon(self):
        with pytest.raises(ConfigurationError) as info:
            parse_config('subcommand = "audit"\n[entropy]\nepsilonn = [0.1]\n')
        assert any("'epsilonn'" in e and "did you mean 'epsilon'" in e for e in info.value.errors)

    def test_collects_every_error(self):
        text = 'subcommand = "experiment"\nn_grid = [4, 2]\ndelta = 1.5\nbogus = 1\n'
        with pytest.raises(ConfigurationError) as info:
            parse_config(text)
        msgs = info.value.errors
        assert len(msgs) >= 4
        assert any("missing required sections" in m for m in msgs)
        assert any("delta" in m for m in msgs)

    def test_bad_subcommand(self):
        with pytest.raises(ConfigurationError, match="did you mean 'audit'"):
            parse_config('subcommand = "audti"\n')

    def test_not_toml(self):
        with pytest.raises(ConfigurationError, match="TOML"):
            parse_config("subcommand = ")

    def test_full_experiment(self):
        cfg = parse_config("""
subcommand = "experiment"
n_grid = [50, 100]
trials = 100
[distribution]
marginal = "ball"
d = 1
target = { kind = "interval", lo = -0.3, hi = 0.4 }
[learner]
scheme = "intervals"
[bound]
id = "k_over_n_plus_1"
params = { k = 2 }
""")
        assert cfg.n_grid == [50, 100] and cfg.bound["params"] == {"k": 2}
        assert {"distribution", "learner", "bound"} <= cfg.present


def run_main(tmp_path, name, *argv):
    out = tmp_path / name
    code = cli.main([*argv, "--out-dir", str(out), "--jobs", "1"])
    return code, out


class TestRun:
    def test_audit_intervals(self, tmp_path, capsys):
        code, out = run_main(tmp_path, "a", "audit", "--scheme", "intervals", "--samples", "50")
        assert code == 0
        rep = json.loads((out / "audit.json").read_text())
        assert rep["stable"] and rep["homogeneous"] and rep["asserted_homogeneous"]
        assert "PASS" in capsys.readouterr().out

    def test_audit_first_k_fails(self, tmp_path):
        code, out = run_main(tmp_path, "a", "audit", "--scheme", "first-k", "--samples", "30", "--d", "1")
        assert code == 1
        assert json.loads((out / "audit.json").read_text())["permutation_invariant"] is False

    def test_same_invocation_identical_files(self, tmp_path):
        argv = ["experiment", "--scheme", "intervals", "--bound", "k_over_n_plus_1",
                "--n", "30,60", "--trials", "40", "--seed", "3"]
        c1, o1 = run_main(tmp_path, "one", *argv)
        c2, o2 = run_main(tmp_path, "two", *argv)
        assert c1 == c2
        names = sorted(p.name for p in o1.iterdir())
        assert names == sorted(p.name for p in o2.iterdir())
        assert "risk_table.csv" in names and "report.json" in names
        for name in names:
            assert (o1 / name).read_bytes() == (o2 / name).read_bytes()

    def test_experiment_svm_report(self, tmp_path):
        code, out = run_main(tmp_path, "s", "experiment", "--scheme", "svm", "--bound",
                             "k_over_n_plus_1", "--n", "99", "--trials", "30")
        rep = json.loads((out / "report.json").read_text())
        assert rep["bound"]["per_n"][0]["bound"] == pytest.approx(0.03)
        assert code == (0 if rep["bound"]["holds"] else 1)

    def test_json_format(self, tmp_path):
        code, out = run_main(tmp_path, "j", "experiment", "--scheme", "intervals", "--n", "20",
                             "--trials", "5", "--format", "json")
        assert code == 0
        recs = json.loads((out / "risk_table.json").read_text())
        assert len(recs) == 5 and set(recs[0]) >= {"learner_id", "n", "seed", "risk"}

    def test_compress_and_svm(self, tmp_path):
        code, out = run_main(tmp_path, "c", "compress", "--scheme", "rectangles", "--n", "40")
        assert code == 0
        assert json.loads((out / "compression.json").read_text())["valid"]
        code, out = run_main(tmp_path, "v", "svm", "--scheme", "svm", "--n", "40")
        assert code == 0
        assert len(json.loads((out / "svm.json").read_text())["essential"]) <= 3

    def test_entropy_from_config(self, tmp_path):
        cfg = tmp_path / "e.toml"
        cfg.write_text("""
subcommand = "entropy"
[distribution]
marginal = "sphere"
d = 2
[class]
kind = "homogeneous-halfspace"
size = 72
[entropy]
epsilon = [0.1, 0.2]
k = 0.01
""")
        code, out = run_main(tmp_path, "e", "entropy", "--config", str(cfg))
        assert code == 0
        lines = (out / "entropy.csv").read_text().splitlines()
        assert lines[0] == "eps,value,kind,solver" and len(lines) == 4

    def test_capacity_error_names_size(self, tmp_path, capsys):
        cfg = tmp_path / "e.toml"
        cfg.write_text("""
subcommand = "entropy"
[distribution]
marginal = "sphere"
[class]
size = 72
[entropy]
epsilon = [0.05]
solver = "exact"
""")
        code, out = run_main(tmp_path, "e", "entropy", "--config", str(cfg))
        assert code == 2
        assert "capacity error" in capsys.readouterr().err
        assert not out.exists()

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = tmp_path / "bad.toml"
        cfg.write_text('n_grid = [400, 200]\n')
        code, _ = run_main(tmp_path, "x", "experiment", "--config", str(cfg))
        assert code == 2
        assert "n_grid not increasing" in capsys.readouterr().err


def test_write_atomic_leaves_no_temp_files(tmp_path):
    target = tmp_path / "sub" / "f.txt"
    cli.write_atomic(target, "hello")
    cli.write_atomic(target, "again")
    assert target.read_text() == "again"
    assert [p.name for p in target.parent.iterdir()] == ["f.txt"]
