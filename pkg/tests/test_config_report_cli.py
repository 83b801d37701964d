import json
import math

import pytest

from entropy_gas_lab.cli import main
from entropy_gas_lab.config import parse_config, render_config
from entropy_gas_lab.errors import UsageError
from entropy_gas_lab.presets import PRESETS, load_preset
from entropy_gas_lab.report import Metric, ReportBundle, atomic_write, dumps, write_report


class TestConfig:
    def test_defaults_echoed(self):
        cfg = parse_config("gas", text="dim=2\nn_particles=100\n")
        echo = render_config(cfg)
        assert cfg["beta"] == 10000.0 and echo["beta"] == "10000"
        assert echo["steps"] == "100000" and echo["kernel"] == "coulomb" and echo["seed"] == "0"
        assert list(echo) == sorted(echo)

    def test_comments_and_fractions(self):
        cfg = parse_config("clt", text="# start\ndensity = uniform  # centered\ngrid_step=1/256\n")
        assert cfg["density"] == "uniform" and cfg["grid_step"] == 1 / 256

    def test_unknown_key_suggestion(self):
        with pytest.raises(UsageError, match="unknown key klernel; did you mean kernel"):
            parse_config("gas", text="dim=2\nn_particles=10\nklernel=coulomb\n")

    def test_missing_keys_listed_together(self):
        with pytest.raises(UsageError, match="dim, n_particles"):
            parse_config("gas", text="")

    def test_type_error(self):
        with pytest.raises(UsageError, match="key n_particles"):
            parse_config("gas", text="dim=2\nn_particles=many\n")
        with pytest.raises(UsageError, match="kernel"):
            parse_config("gas", text="dim=2\nn_particles=10\nkernel=riesz\n")

    def test_steps_must_exceed_burn_in(self):
        with pytest.raises(UsageError, match="burn_in"):
            parse_config("gas", text="dim=2\nn_particles=10\nsteps=10\nburn_in=10\n")

    def test_overrides_win(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("chain=mm_infinity\nsteps=5\n")
        cfg = parse_config("markov", path, overrides={"steps": "7"})
        assert cfg["steps"] == 7

    def test_malformed_line(self):
        with pytest.raises(UsageError, match=":2:"):
            parse_config("free", text="degrees=4,8\nnonsense\n")

    def test_presets_parse(self):
        for name, (sub, _) in PRESETS.items():
            cfg = load_preset(name)
            assert cfg.subcommand == sub
        assert load_preset("ginibre-circular-law")["beta"] == 250000.0
        with pytest.raises(UsageError, match="belongs to the gas"):
            load_preset("gue-semicircle", "markov")


class TestReport:
    def test_metric_rules(self):
        assert Metric(0.01, "<", 0.05).passed
        assert not Metric(0.06, "<", 0.05).passed
        assert Metric(0.51, "within", 0.025, 0.5).passed
        assert Metric(0.75, "between", (0.7, 0.8)).passed
        assert not Metric(math.nan, "<=", 1.0).passed
        assert Metric(True, "true").passed

    def test_round_trip(self, tmp_path):
        bundle = ReportBundle("free", {"x": Metric(0.1 + 0.2, "<", 1.0), "n": Metric(3, ">=", 2)},
                              {"big": 1e300, "whole": 2.0}, ["a.csv"], {"seed": 4})
        write_report(bundle, tmp_path)
        back = json.loads((tmp_path / "summary.json").read_text())
        assert back["status"] == "PASS"
        assert back["metrics"]["x"]["value"] == 0.1 + 0.2
        assert back["diagnostics"]["whole"] == 2.0 and isinstance(back["diagnostics"]["whole"], float)
        assert isinstance(back["metrics"]["n"]["value"], int)

    def test_empty_and_failed(self):
        assert ReportBundle("clt").status == "PASS"
        assert ReportBundle("clt", {"a": Metric(2, "<", 1)}).status == "FAIL"
        assert ReportBundle("clt", error="boom").status == "FAILED"

    def test_sorted_and_non_finite(self):
        text = dumps({"b": math.inf, "a": [1.5, -math.inf]})
        assert text.index('"a"') < text.index('"b"') and "Infinity" in text
        assert json.loads(text)["b"] == math.inf

    def test_atomic_overwrite(self, tmp_path):
        p = tmp_path / "s.json"
        atomic_write(p, "one")
        atomic_write(p, "two")
        assert p.read_text() == "two" and [q.name for q in tmp_path.iterdir()] == ["s.json"]


class TestCli:
    def test_list_presets(self, capsys):
        assert main(["--list-presets"]) == 0
        assert "ginibre-circular-law\tgas" in capsys.readouterr().out

    def test_markov_preset(self, tmp_path, capsys):
        assert main(["markov", "--preset", "mm-infinity-free-energy", "--out", str(tmp_path)]) == 0
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["status"] == "PASS" and (tmp_path / "free_energy.csv").exists()
        assert "PASS" in capsys.readouterr().out

    def test_free(self, tmp_path):
        assert main(["free", "--out", str(tmp_path)]) == 0

    def test_clt_failure_exit(self, tmp_path):
        # an impossible tolerance turns a passing check into exit code 1
        code = main(["clt", "--set", "density=gaussian", "--set", "de_bruijn_tolerance=1e-30",
                     "--out", str(tmp_path)])
        assert code == 1
        assert json.loads((tmp_path / "summary.json").read_text())["status"] == "FAIL"

    def test_usage_errors(self, tmp_path, capsys):
        assert main(["gas", "--set", "dim=2", "--set", "n_particles=5", "--set", "klernel=coulomb",
                     "--out", str(tmp_path)]) == 2
        assert "did you mean kernel" in capsys.readouterr().err
        assert main(["gas", "--out", str(tmp_path)]) == 2
        assert main(["markov", "--set", "chain", "--out", str(tmp_path)]) == 2
        assert main([]) == 2

    def test_structural_error_exit(self, tmp_path):
        chain = tmp_path / "reducible.txt"
        chain.write_text("kind=kernel\nS=2\n1 0\n0 1\n")
        assert main(["markov", "--set", f"chain={chain}", "--out", str(tmp_path / "o")]) == 3
        assert json.loads((tmp_path / "o" / "summary.json").read_text())["status"] == "FAILED"

    def test_small_gas_run(self, tmp_path):
        code = main(["gas", "--set", "dim=2", "--set", "n_particles=30", "--set", "kernel=log2d:2",
                     "--set", "steps=1500", "--set", "burn_in=500", "--out", str(tmp_path)])
        assert code in (0, 1)
        summary = json.loads((tmp_path / "summary.json").read_text())
        assert summary["metrics"]["energy_finite"]["pass"]
        assert summary["provenance"]["config"]["n_particles"] == "30"
