"""
End-to-end tests for the command-line entry point.
"""
import argparse
import json
from pathlib import Path

import pytest

from main import main
from src.cli.common import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, parse_grid, parse_subset
from src.core.config import settings
from src.core.run_store import read_csv_rows

CONFIG = str(Path(__file__).resolve().parents[2] / "config" / "models.json")


def run(*args: str) -> int:
    return main([*args[:1], "--model-config", CONFIG, *args[1:]])


class TestArgumentTypes:

    def test_grid_range(self):
        grid = parse_grid("0.05:0.5:0.05")
        assert len(grid) == 10
        assert grid[0] == 0.05 and grid[-1] == 0.5
        assert grid[2] == 0.15

    def test_grid_list(self):
        assert parse_grid("0.1,0.3") == [0.1, 0.3]

    @pytest.mark.parametrize("text", ["0.5:0.1:0.1", "0:1:0", "a:b:c"])
    def test_invalid_grid(self, text):
        with pytest.raises(argparse.ArgumentTypeError):
            parse_grid(text)

    def test_subset(self):
        assert parse_subset("1,3") == [1, 3]
        with pytest.raises(argparse.ArgumentTypeError):
            parse_subset("1,x")


class TestEstimateCommand:

    def test_all_frozen_subset(self, tmp_path):
        out = tmp_path / "est.csv"
        code = run("estimate", "--model", "ishigami", "--u", "1,2,3", "--n", "1000", "--seed", "1",
                   "--estimator", "T", "--out", str(out))
        assert code == EXIT_OK
        rows = read_csv_rows(str(out))
        assert rows == [{"subset": "1,2,3", "estimator": "T", "value": "1.0", "ci_low": "", "ci_high": "",
                         "n": "1000", "seed": "1"}]

    def test_default_subsets_and_intervals(self, tmp_path):
        out = tmp_path / "est.csv"
        assert run("estimate", "--model", "ishigami", "--n", "5000", "--seed", "2", "--level", "0.95",
                   "--out", str(out)) == EXIT_OK
        rows = read_csv_rows(str(out))
        assert [row["subset"] for row in rows] == ["1", "2", "3"]
        for row in rows:
            assert float(row["ci_low"]) < float(row["value"]) < float(row["ci_high"])

    def test_full_info_leaves_interval_empty(self, tmp_path):
        out = tmp_path / "est.csv"
        assert run("estimate", "--model", "ishigami", "--u", "1", "--n", "1000", "--seed", "2",
                   "--estimator", "full", "--level", "0.95", "--out", str(out)) == EXIT_OK
        assert read_csv_rows(str(out))[0]["ci_low"] == ""

    def test_rerun_is_byte_identical(self, tmp_path):
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (first, second):
            run("estimate", "--model", "breguet", "--n", "2000", "--seed", "5", "--out", str(path))
        assert first.read_bytes() == second.read_bytes()

    def test_json_output(self, tmp_path):
        out = tmp_path / "est.json"
        assert run("estimate", "--model", "two-dice", "--n", "500", "--seed", "3", "--format", "json",
                   "--out", str(out)) == EXIT_OK
        document = json.loads(out.read_text(encoding="utf-8"))
        assert document["metadata"]["seed"] == 3
        assert document["metadata"]["config"]["model"] == "two-dice"
        assert len(document["rows"]) == 2

    def test_seed_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "seed", 42)
        out = tmp_path / "est.csv"
        assert run("estimate", "--model", "ishigami", "--u", "1", "--n", "100", "--out", str(out)) == EXIT_OK
        assert out.read_text(encoding="utf-8").startswith("# seed=42\n")


class TestExitCodes:

    def test_usage_error(self):
        assert main(["estimate", "--model", "ishigami"]) == EXIT_CONFIG

    def test_unknown_subcommand(self):
        assert main(["simulate"]) == EXIT_CONFIG

    def test_small_n(self, tmp_path):
        assert run("estimate", "--model", "ishigami", "--n", "1", "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_unknown_model(self, tmp_path):
        assert run("estimate", "--model", "rosenbrock", "--n", "100", "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_subset_out_of_range(self, tmp_path):
        assert run("estimate", "--model", "ishigami", "--u", "4", "--n", "100",
                   "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_invalid_alpha(self, tmp_path):
        assert run("test", "--model", "ishigami", "--u", "3", "--n", "100", "--A", "1", "--alpha", "1.5",
                   "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_degenerate_output(self, tmp_path):
        config = tmp_path / "models.json"
        config.write_text(json.dumps({"models": {"flat": {
            "kind": "table",
            "supports": [[0, 1]],
            "probabilities": [["1/2", "1/2"]],
            "values": [4, 4],
        }}}), encoding="utf-8")
        code = main(["estimate", "--model-config", str(config), "--model", "flat", "--u", "1", "--n", "100",
                     "--out", str(tmp_path / "x.csv")])
        assert code == EXIT_NUMERICAL


class TestTestCommand:

    def test_single_linear_test(self, tmp_path):
        out = tmp_path / "test.csv"
        assert run("test", "--model", "ishigami", "--u", "3", "--n", "2000", "--A", "1", "--seed", "4",
                   "--out", str(out)) == EXIT_OK
        row = read_csv_rows(str(out))[0]
        assert row["statistic_kind"] == "linear"
        assert row["reject"] in ("true", "false")

    def test_level_study_is_thread_invariant(self, tmp_path):
        outputs = []
        for threads in ("1", "4"):
            out = tmp_path / f"level{threads}.csv"
            assert run("test", "--model", "ishigami", "--u", "3", "--n", "300", "--A", "1", "--seed", "6",
                       "--reps", "20", "--repetitions", "2", "--threads", threads, "--out", str(out)) == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]
        rows = read_csv_rows(str(tmp_path / "level1.csv"))
        assert [row["repetition"] for row in rows] == ["0", "1"]


class TestSweepCommands:

    def test_power(self, tmp_path):
        out = tmp_path / "power.csv"
        assert run("power", "--model", "example1", "--n", "100", "--grid", "0:0.2:0.2", "--reps", "10",
                   "--seed", "1", "--out", str(out)) == EXIT_OK
        rows = read_csv_rows(str(out))
        assert [row["parameter"] for row in rows] == ["0.0", "0.2"]
        assert all(row["closed_form_power"] != "" for row in rows)

    def test_power_needs_family(self, tmp_path):
        assert run("power", "--model", "ishigami", "--n", "100", "--grid", "0:0.2:0.2", "--reps", "10",
                   "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_concentration(self, tmp_path):
        out = tmp_path / "conc.csv"
        assert run("concentration", "--model", "ishigami", "--u", "1", "--n", "1000", "--grid", "0.1:0.3:0.1",
                   "--variant", "T", "--seed", "2", "--out", str(out)) == EXIT_OK
        rows = read_csv_rows(str(out))
        assert len(rows) == 3 * 2
        assert sorted({row["y"] for row in rows}) == ["0.1", "0.2", "0.3"]
        assert all(0.0 <= float(row["bound"]) <= 1.0 for row in rows)
        assert all(row["b_estimated"] == "false" for row in rows)

    def test_concentration_with_estimated_b(self, tmp_path):
        out = tmp_path / "conc.csv"
        assert run("concentration", "--model", "ishigami", "--u", "1", "--n", "500", "--grid", "0.1",
                   "--b", "estimate", "--reps", "5", "--seed", "2", "--out", str(out)) == EXIT_OK
        rows = read_csv_rows(str(out))
        assert all(row["b_estimated"] == "true" for row in rows)
        assert all(row["empirical"] != "" for row in rows)

    def test_concentration_rejects_bad_b(self, tmp_path):
        assert run("concentration", "--model", "ishigami", "--u", "1", "--n", "1000", "--grid", "0.1",
                   "--b", "big", "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG

    def test_berry(self, tmp_path):
        out = tmp_path / "berry.csv"
        assert run("berry", "--model", "ishigami-centered", "--n", "1000", "--reps", "10", "--seed", "3",
                   "--out", str(out)) == EXIT_OK
        rows = read_csv_rows(str(out))
        assert list(rows[0]) == ["n", "L", "U", "empirical_coverage", "mu3", "sigma2"]
        assert 0.0 <= float(rows[0]["L"]) <= float(rows[0]["U"]) <= 1.0

    @pytest.mark.parametrize("command", [
        ("power", "--model", "example1", "--n", "100", "--grid", "0:0.4:0.2", "--stat", "t2", "--reps", "12"),
        ("concentration", "--model", "breguet", "--u", "3", "--n", "400", "--grid", "0.1,0.2", "--reps", "6"),
        ("berry", "--model", "ishigami-centered", "--u", "1", "--n", "500,1000", "--reps", "8"),
    ])
    def test_sweeps_are_thread_invariant(self, tmp_path, monkeypatch, command):
        monkeypatch.setattr(settings, "reference_n", 5000)
        outputs = []
        for threads in ("1", "3"):
            out = tmp_path / f"sweep{threads}.csv"
            assert run(*command, "--seed", "8", "--threads", threads, "--out", str(out)) == EXIT_OK
            outputs.append(out.read_bytes())
        assert outputs[0] == outputs[1]


class TestNumericalSettingsEcho:

    @staticmethod
    def _config_line(path: Path) -> dict:
        for line in path.read_text(encoding="utf-8").splitlines():
            if line.startswith("# config="):
                return json.loads(line[len("# config="):])
        raise AssertionError("no config line")

    def test_defaults_are_recorded(self, tmp_path):
        out = tmp_path / "est.csv"
        assert run("estimate", "--model", "ishigami", "--u", "1", "--n", "100", "--seed", "1",
                   "--out", str(out)) == EXIT_OK
        config = self._config_line(out)
        assert config["block_rows"] == settings.block_rows
        assert config["null_draws"] == settings.null_draws
        assert config["reference_n"] == settings.reference_n
        assert "threads" not in config and "out" not in config

    def test_block_rows_changes_output_and_is_recorded(self, tmp_path, monkeypatch):
        default, small = tmp_path / "default.csv", tmp_path / "small.csv"
        args = ("estimate", "--model", "ishigami", "--u", "1", "--n", "2000", "--seed", "9")
        assert run(*args, "--out", str(default)) == EXIT_OK
        monkeypatch.setattr(settings, "block_rows", 1000)
        assert run(*args, "--out", str(small)) == EXIT_OK
        assert self._config_line(small)["block_rows"] == 1000
        assert read_csv_rows(str(default))[0]["value"] != read_csv_rows(str(small))[0]["value"]

    def test_null_draws_reach_the_simulated_threshold(self, tmp_path, monkeypatch):
        outputs = {}
        for draws in (2000, 3000):
            monkeypatch.setattr(settings, "null_draws", draws)
            out = tmp_path / f"t2_{draws}.csv"
            assert run("test", "--model", "example1", "--u", "1", "--u", "2", "--n", "500", "--stat", "t2",
                       "--seed", "4", "--out", str(out)) == EXIT_OK
            assert self._config_line(out)["null_draws"] == draws
            outputs[draws] = read_csv_rows(str(out))[0]["threshold"]
        assert outputs[2000] != outputs[3000]

    def test_reference_n_is_recorded(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "reference_n", 4000)
        out = tmp_path / "conc.csv"
        assert run("concentration", "--model", "breguet", "--u", "3", "--n", "300", "--grid", "0.1",
                   "--reps", "4", "--seed", "2", "--out", str(out)) == EXIT_OK
        assert self._config_line(out)["reference_n"] == 4000

    def test_non_positive_block_rows_is_a_config_error(self, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "block_rows", 0)
        assert run("estimate", "--model", "ishigami", "--u", "1", "--n", "100",
                   "--out", str(tmp_path / "x.csv")) == EXIT_CONFIG
