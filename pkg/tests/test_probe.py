"""
Tests for frozen-encoder probes
"""
import pytest
import torch

from config import GenerateConfig, StateProbeConfig
from exceptions import DatasetError, FrozenEncoderError, UndefinedResultError
from services.dataset_service import generate_dataset, load_dataset
from services.networks import Encoder, encoder_digest
from services.probe_service import (
    RESULT_COLUMNS,
    ProbeRow,
    expert_policy_fn,
    frozen_encoder,
    random_policy_fn,
    read_probe_results,
    rollout_eval,
    run_bc_probes,
    summarize_losses,
    task_groups,
    train_bc_probe,
    train_state_probe,
    write_probe_results,
)
from tests.conftest import make_trajectory


@pytest.fixture
def encoder(tiny_encoder_config):
    return Encoder(tiny_encoder_config, init_seed=7)


@pytest.fixture(scope="module")
def reach_dataset(tmp_path_factory, tiny_sim):
    """Sixteen reach demonstrations with a quarter held out for validation."""
    path = tmp_path_factory.mktemp("data") / "reach"
    generate_dataset(GenerateConfig(n_traj=16, seed=3, tasks=["reach"], sim=tiny_sim, val_fraction=0.25), path)
    return load_dataset(path)


class TestSummarizeLosses:
    """Test reported probe losses"""

    @pytest.mark.unit
    def test_means(self):
        """Test full-run train mean and mean of validation evaluations"""
        assert summarize_losses([1.0, 2.0, 3.0, 4.0], [0.5, 1.5]) == (2.5, 1.0)

    @pytest.mark.unit
    def test_window(self):
        """Test the train mean over the last steps only"""
        assert summarize_losses([1.0, 2.0, 3.0, 4.0], [1.0], window=2) == (3.5, 1.0)

    @pytest.mark.unit
    @pytest.mark.parametrize("train,val", [([], [1.0]), ([1.0], [])])
    def test_undefined(self, train, val):
        """Test empty curves have no summary"""
        with pytest.raises(UndefinedResultError):
            summarize_losses(train, val)


class TestFrozenEncoder:
    """Test the frozen-encoder guard"""

    @pytest.mark.unit
    def test_detects_change(self, encoder):
        """Test a parameter update inside the block is reported"""
        with pytest.raises(FrozenEncoderError):
            with frozen_encoder(encoder):
                with torch.no_grad():
                    encoder.patch_embed.bias.add_(1.0)

    @pytest.mark.unit
    def test_restores_flags(self, encoder):
        """Test gradient flags and mode are restored"""
        encoder.train()
        with frozen_encoder(encoder) as digest:
            assert not encoder.training
            assert not any(p.requires_grad for p in encoder.parameters())
        assert digest == encoder_digest(encoder)
        assert encoder.training
        assert all(p.requires_grad for p in encoder.parameters())


class TestBCProbe:
    """Test the behavior cloning probe"""

    @pytest.mark.integration
    def test_train(self, encoder, reach_trajectories, tiny_bc_probe_config):
        """Test curves, cadence and an unchanged encoder"""
        before = encoder_digest(encoder)
        result = train_bc_probe(encoder, reach_trajectories, tiny_bc_probe_config)
        assert encoder_digest(encoder) == before == result.encoder_digest
        assert len(result.train_losses) == tiny_bc_probe_config.steps
        assert [s for s, _ in result.val_curve] == [2, 4, 6]
        assert result.val_loss == pytest.approx(sum(result.val_losses) / 3)
        assert result.head.d_out == tiny_bc_probe_config.horizon * 7

    @pytest.mark.integration
    def test_deterministic(self, encoder, reach_trajectories, tiny_bc_probe_config):
        """Test repeated probes on the same encoder agree"""
        a = train_bc_probe(encoder, reach_trajectories, tiny_bc_probe_config)
        b = train_bc_probe(encoder, reach_trajectories, tiny_bc_probe_config)
        assert a.train_losses == b.train_losses
        assert a.val_curve == b.val_curve

    @pytest.mark.integration
    def test_loss_decreases(self, encoder, reach_trajectories, tiny_bc_probe_config):
        """Test the training loss falls over a short run on the reach demonstrations"""
        config = tiny_bc_probe_config.model_copy(update={"steps": 60, "lr": 1e-3, "dropout": 0.0, "eval_every": 20})
        result = train_bc_probe(encoder, reach_trajectories, config)
        losses = result.train_losses
        assert sum(losses[-10:]) / 10 < sum(losses[:10]) / 10
        assert [s for s, _ in result.val_curve] == [20, 40, 60]

    @pytest.mark.integration
    def test_run_shorter_than_interval(self, encoder, reach_trajectories, tiny_bc_probe_config):
        """Test a run without a scheduled evaluation reports the final validation loss"""
        config = tiny_bc_probe_config.model_copy(update={"eval_every": 100})
        result = train_bc_probe(encoder, reach_trajectories, config)
        assert result.val_curve == [(config.steps, result.final_val_loss)]
        assert result.val_loss == result.final_val_loss

    @pytest.mark.unit
    def test_too_few_demonstrations(self, encoder, tiny_bc_probe_config):
        """Test a single demonstration cannot be split"""
        with pytest.raises(DatasetError):
            train_bc_probe(encoder, [make_trajectory(image_size=16)], tiny_bc_probe_config)

    @pytest.mark.integration
    def test_run_bc_probes(self, encoder, reach_trajectories, tiny_bc_probe_config, tiny_sim):
        """Test one row per task with a success rate"""
        rows = run_bc_probes(encoder, "random:7", reach_trajectories, tiny_bc_probe_config, tiny_sim)
        assert [row.task for row in rows] == ["reach:blue"]
        assert rows[0].encoder_id == "random:7"
        assert 0.0 <= rows[0].success_rate <= 1.0
        assert rows[0].state_val_loss is None


class TestRollouts:
    """Test closed-loop evaluation"""

    @pytest.mark.integration
    def test_expert_succeeds(self):
        """Test the expert solves at least 95% of evaluation episodes"""
        report = rollout_eval(expert_policy_fn(), ["pick:red", "reach:blue"], n_rollouts=10, views=())
        assert report.aggregate >= 0.95
        assert set(report.per_task) == {"pick:red", "reach:blue"}

    @pytest.mark.integration
    def test_random_policy_fails(self):
        """Test random actions essentially never stack"""
        report = rollout_eval(random_policy_fn(0), ["stack:red:blue"], n_rollouts=10, episode_cap=50, views=())
        assert report.aggregate <= 0.1

    @pytest.mark.unit
    def test_seeded(self):
        """Test identical seeds give identical outcomes"""
        a = rollout_eval(random_policy_fn(1), ["reach:red"], n_rollouts=3, episode_cap=20, views=())
        b = rollout_eval(random_policy_fn(1), ["reach:red"], n_rollouts=3, episode_cap=20, views=())
        assert a.success == b.success


class TestStateProbe:
    """Test the proprioceptive state probe"""

    @pytest.mark.integration
    def test_train(self, encoder, tiny_dataset, tiny_state_probe_config):
        """Test the probe trains on a frozen encoder and validates on cadence"""
        before = encoder_digest(encoder)
        result = train_state_probe(encoder, tiny_dataset, tiny_state_probe_config)
        assert encoder_digest(encoder) == before
        assert result.head.d_out == 8
        assert result.val_curve
        assert all(s % tiny_state_probe_config.eval_every == 0 for s, _ in result.val_curve)
        assert result.final_val_loss is not None and result.final_val_loss > 0
        assert result.baseline_val_loss > 0
        assert result.val_loss > 0

    @pytest.mark.integration
    def test_deterministic(self, encoder, tiny_dataset, tiny_state_probe_config):
        """Test repeated probes agree"""
        a = train_state_probe(encoder, tiny_dataset, tiny_state_probe_config)
        b = train_state_probe(encoder, tiny_dataset, tiny_state_probe_config)
        assert a.val_curve == b.val_curve

    @pytest.mark.integration
    def test_beats_median_baseline(self, encoder, reach_dataset):
        """Test a trained probe ends below the constant-median validation loss"""
        config = StateProbeConfig(
            lr=3e-3, batch_size=32, epochs=40, eval_every=50, proj_dim=16, hidden_dim=32, dropout=0.0
        )
        result = train_state_probe(encoder, reach_dataset, config)
        assert result.final_val_loss < result.baseline_val_loss


class TestResults:
    """Test the results table"""

    @pytest.mark.unit
    def test_write_read(self, tmp_path):
        """Test rows survive the CSV with empty cells for missing values"""
        rows = [
            ProbeRow("bc", "pick:red", success_rate=0.5, bc_train_loss=0.1, bc_val_loss=0.2),
            ProbeRow("bc", "all", state_train_loss=0.3, state_val_loss=0.4),
        ]
        path = write_probe_results(rows, tmp_path / "probe_results.csv")
        assert path.read_text().splitlines()[0] == ",".join(RESULT_COLUMNS)
        assert read_probe_results(path) == rows

    @pytest.mark.unit
    def test_task_groups(self):
        """Test grouping by instruction key in sorted order"""
        trajs = [
            make_trajectory(traj_id=0, key="reach:red"),
            make_trajectory(traj_id=1, key="pick:red"),
            make_trajectory(traj_id=2, key="reach:red"),
        ]
        groups = task_groups(trajs)
        assert list(groups) == ["pick:red", "reach:red"]
        assert [t.traj_id for t in groups["reach:red"]] == [0, 2]
