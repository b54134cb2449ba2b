"""
Tests for main.py - command-line entry point.
"""
import json

import pytest

from main import build_parser, main

GENERATE = {"n_traj": 4, "seed": 0, "tasks": ["reach"], "val_fraction": 0.25, "sim": {"image_size": 16}}
TRAIN = {
    "horizon": 2,
    "steps": 2,
    "batch_size": 4,
    "log_every": 1,
    "encoder": {"image_size": 16, "patch_size": 4, "channels": 8, "depth": 1},
    "heads": {"invdyn_dim": 8, "policy_token_dim": 4, "policy_hidden_dim": 16, "instruction_dim": 4},
}
STATE_PROBE = {"batch_size": 16, "epochs": 1, "eval_every": 2, "proj_dim": 4, "hidden_dim": 8}
ALIGN = {"gaps": [1, 2], "pairs_per_gap": 12, "thumb_size": 4, "split": "all"}


def write_json(path, data):
    path.write_text(json.dumps(data))
    return str(path)


class TestParser:
    """Test argument parsing and exit codes."""

    @pytest.mark.unit
    def test_subcommands(self):
        """Test every subcommand is registered."""
        parser = build_parser()
        choices = parser._subparsers._group_actions[0].choices
        assert set(choices) == {
            "gen-data", "train", "probe-bc", "probe-state", "align", "report", "verify", "experiment"
        }

    @pytest.mark.unit
    def test_unknown_subcommand(self):
        """Test unknown subcommands are usage errors."""
        assert main(["juggle"]) == 2

    @pytest.mark.unit
    def test_missing_subcommand(self):
        """Test a subcommand is required."""
        assert main([]) == 2

    @pytest.mark.unit
    def test_bad_choice(self, tmp_path):
        """Test an unknown variant is a usage error."""
        assert main(["train", "--data", str(tmp_path), "--variant", "ppo", "--out", str(tmp_path)]) == 2

    @pytest.mark.unit
    def test_version(self):
        """Test --version exits cleanly."""
        assert main(["--version"]) == 0


class TestFailures:
    """Test failed preconditions."""

    @pytest.mark.unit
    def test_missing_dataset(self, tmp_path, capsys):
        """Test a missing dataset exits 1 with a one-line diagnostic."""
        code = main(["train", "--data", str(tmp_path / "none"), "--variant", "bc", "--out", str(tmp_path / "run")])
        assert code == 1
        err = capsys.readouterr().err.strip().splitlines()
        assert len(err) == 1
        assert err[0].startswith("error: DatasetError")

    @pytest.mark.unit
    def test_invalid_config(self, tmp_path, capsys):
        """Test an invalid config file exits 1."""
        config = write_json(tmp_path / "gen.json", {"n_traj": 0})
        assert main(["gen-data", "--config", config, "--out", str(tmp_path / "data")]) == 1
        assert "ConfigurationError" in capsys.readouterr().err

    @pytest.mark.unit
    def test_bad_encoder_reference(self, tiny_dataset_dir, tmp_path):
        """Test a malformed random encoder reference exits 1."""
        code = main(
            ["align", "--ckpt", "random:abc", "--data", str(tiny_dataset_dir), "--out", str(tmp_path / "a")]
        )
        assert code == 1


class TestWorkflow:
    """Test the gen-data -> train -> probe -> align -> report flow."""

    @pytest.mark.integration
    def test_flow(self, tmp_path):
        """Test each step writes its artifacts and a run.json echo."""
        data = tmp_path / "data"
        runs = tmp_path / "runs"
        assert main(["gen-data", "--config", write_json(tmp_path / "gen.json", GENERATE), "--out", str(data)]) == 0
        assert (data / "manifest.json").exists()

        train_config = write_json(tmp_path / "train.json", TRAIN)
        run_dir = runs / "aux-ptr"
        assert main(
            ["train", "--config", train_config, "--data", str(data), "--variant", "aux-ptr", "--out", str(run_dir)]
        ) == 0
        echo = json.loads((run_dir / "run.json").read_text())
        assert echo["command"] == "train"
        assert echo["arguments"]["variant"] == "aux-ptr"
        assert echo["configs"]["train"]["aux"] is True
        assert "handler" not in echo["arguments"]

        checkpoint = str(run_dir / "checkpoint.sal")
        state_config = write_json(tmp_path / "state.json", STATE_PROBE)
        assert main(
            ["probe-state", "--config", state_config, "--ckpt", checkpoint, "--data", str(data),
             "--out", str(runs / "probe-state")]
        ) == 0
        assert (runs / "probe-state" / "probe_results.csv").exists()

        align_config = write_json(tmp_path / "align.json", ALIGN)
        assert main(
            ["align", "--config", align_config, "--ckpt", checkpoint, "random:0", "--data", str(data),
             "--out", str(runs / "align")]
        ) == 0
        summary = (runs / "align" / "alignment_summary.csv").read_text()
        assert "aux-ptr,cosine" in summary
        assert "random:0,cosine" in summary

        assert main(["report", "--in", str(runs), "--out", str(tmp_path / "report")]) == 0
        assert (tmp_path / "report" / "index.html").exists()
        assert (tmp_path / "report" / "loss_curves.svg").exists()

    @pytest.mark.integration
    def test_seed_override(self, tmp_path):
        """Test --seed reaches the config echo."""
        config = write_json(tmp_path / "gen.json", GENERATE)
        assert main(["gen-data", "--config", config, "--seed", "9", "--n", "2", "--out", str(tmp_path / "d")]) == 0
        echo = json.loads((tmp_path / "d" / "run.json").read_text())
        assert echo["configs"]["generate"]["seed"] == 9
        assert echo["configs"]["generate"]["n_traj"] == 2

    @pytest.mark.integration
    def test_default_output_under_artifact_root(self, tmp_path, monkeypatch):
        """Test commands without --out write below SAL_ARTIFACT_ROOT/<command>."""
        from env_config import reload_settings

        monkeypatch.setenv("SAL_ARTIFACT_ROOT", str(tmp_path / "artifacts"))
        config = write_json(tmp_path / "gen.json", GENERATE)
        try:
            assert main(["gen-data", "--config", config, "--n", "2"]) == 0
        finally:
            monkeypatch.delenv("SAL_ARTIFACT_ROOT")
            reload_settings()
        assert (tmp_path / "artifacts" / "gen-data" / "manifest.json").exists()
        assert (tmp_path / "artifacts" / "gen-data" / "run.json").exists()
