import json
import subprocess
import sys

import pytest

from hubplan.cli import main
from hubplan.config import ConfigError, RunConfig, apply_env_overrides, parse_config, save_config
from hubplan.metrics import TaskRecord, aggregate, format_table, save_metrics


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = RunConfig(seed=7, epsilon=0.002, encoder_backend="oracle")
        path = tmp_path / "run.cfg"
        save_config(cfg, path)
        assert parse_config(path) == cfg

    def test_comments_and_blank_lines(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("# run settings\nseed = 3\n\nepsilon = 0.01  # tolerance\n")
        cfg = parse_config(path)
        assert cfg.seed == 3 and cfg.epsilon == 0.01

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("learning_rate = 1\n")
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config(path)

    def test_bad_value_rejected(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("seed = fast\n")
        with pytest.raises(ConfigError, match="bad value"):
            parse_config(path)

    def test_bad_backend_rejected(self):
        with pytest.raises(ConfigError):
            RunConfig(encoder_backend="psychic")

    def test_env_overrides(self, monkeypatch):
        monkeypatch.setenv("HUBPLAN_SEED", "99")
        monkeypatch.setenv("HUBPLAN_OUT", "/tmp/elsewhere")
        cfg = apply_env_overrides(RunConfig())
        assert cfg.seed == 99
        assert cfg.out_dir == "/tmp/elsewhere"

    def test_env_override_bad_seed(self, monkeypatch):
        monkeypatch.setenv("HUBPLAN_SEED", "soon")
        with pytest.raises(ConfigError):
            apply_env_overrides(RunConfig())


def records_fixture():
    return [
        TaskRecord(0, "red,blue", True, True, 100, 10, 10, 0.5, None),
        TaskRecord(0, "red,green", True, False, 40, 3, 8, 0.7, "hub-timeout"),
        TaskRecord(1, "blue,red", False, True, 120, 12, 12, 0.6, None),
        TaskRecord(1, "green,red", False, False, 0, 0, 0, float("nan"), "no-plan"),
    ]


class TestMetrics:
    def test_aggregate_values(self):
        agg = aggregate(records_fixture())
        assert agg["seen_successes"] == 1 and agg["seen_total"] == 2
        assert agg["seen_success_rate"] == 0.5
        assert agg["unseen_success_rate"] == 0.5
        assert agg["seen_mean_steps"] == 100.0
        assert agg["unseen_mean_edges"] == 12.0
        assert agg["actions_per_edge"] == (100 + 120) / (10 + 12)

    def test_aggregates_recomputable_from_table(self, tmp_path):
        records = records_fixture()
        agg = save_metrics(records, tmp_path)
        data = json.loads((tmp_path / "metrics.json").read_text())
        per_task = data["per_task"]
        wins = [r for r in per_task if r["success"]]
        total_steps = sum(r["steps"] for r in wins)
        total_edges = sum(r["edges_crossed"] for r in wins)
        assert data["aggregates"]["actions_per_edge"] == total_steps / total_edges
        assert data["aggregates"] == {k: v for k, v in agg.items()}

    def test_table_mentions_every_task(self):
        text = format_table(records_fixture(), aggregate(records_fixture()))
        assert text.count("red,blue") == 1
        assert "no-plan" in text


class TestCliExitCodes:
    def test_config_error_is_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.cfg"
        bad.write_text("nonsense = 1\n")
        code = main(["gen-demos", "--config", str(bad)])
        assert code == 2
        assert "configuration error" in capsys.readouterr().err

    def test_missing_config_file_is_exit_2(self, capsys):
        assert main(["gen-demos", "--config", "/nonexistent/x.cfg"]) == 2

    def test_missing_artifact_is_exit_1_and_names_stage(self, tmp_path, capsys):
        code = main(["train-high", "--out", str(tmp_path / "empty")])
        assert code == 1
        err = capsys.readouterr().err
        assert "gen-demos" in err or "build-topology" in err

    def test_stage_subcommands_exist(self):
        from hubplan.pipeline import STAGE_ORDER

        assert STAGE_ORDER == ["gen-demos", "train-low", "build-topology",
                               "train-high", "train-policies", "eval"]

    def test_console_entry_point(self):
        result = subprocess.run([sys.executable, "-m", "hubplan.cli", "--help"],
                                capture_output=True, text=True)
        assert result.returncode == 0
        for name in ("gen-demos", "run-all", "ablate", "plan"):
            assert name in result.stdout
