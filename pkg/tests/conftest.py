"""
State-Aliasing Lab - Test Suite
Pytest configuration and fixtures
"""

import numpy as np
import pytest

from config import (
    AlignConfig,
    BCProbeConfig,
    EncoderConfig,
    GenerateConfig,
    HeadConfig,
    SimConfig,
    StateProbeConfig,
    TrainConfig,
)
from models import ACTION_DIM, Instruction, Trajectory


@pytest.fixture(scope="session")
def tiny_sim():
    """Simulator rendering 16x16 images."""
    return SimConfig(image_size=16)


@pytest.fixture(scope="session")
def tiny_encoder_config():
    """16 tokens of 8 channels at 16x16."""
    return EncoderConfig(image_size=16, patch_size=4, channels=8, depth=1)


@pytest.fixture(scope="session")
def tiny_heads():
    return HeadConfig(invdyn_dim=8, policy_token_dim=4, policy_hidden_dim=16, instruction_dim=4)


@pytest.fixture(scope="session")
def tiny_generate_config(tiny_sim):
    return GenerateConfig(n_traj=8, seed=0, tasks=["pick", "reach"], sim=tiny_sim, val_fraction=0.25)


@pytest.fixture
def tiny_train_config(tiny_encoder_config, tiny_heads):
    return TrainConfig(
        horizon=2,
        steps=6,
        batch_size=4,
        seed=0,
        log_every=2,
        encoder=tiny_encoder_config,
        heads=tiny_heads,
    )


@pytest.fixture
def tiny_bc_probe_config():
    return BCProbeConfig(
        horizon=2,
        batch_size=8,
        steps=6,
        eval_every=2,
        val_fraction=0.25,
        proj_dim=4,
        hidden_dim=8,
        n_rollouts=2,
        episode_cap=10,
    )


@pytest.fixture
def tiny_state_probe_config():
    return StateProbeConfig(batch_size=16, eval_every=2, proj_dim=4, hidden_dim=8, max_val_frames=32)


@pytest.fixture
def tiny_align_config():
    return AlignConfig(gaps=[1, 2], pairs_per_gap=12, thumb_size=4, split="all")


@pytest.fixture(scope="session")
def tiny_dataset_dir(tmp_path_factory, tiny_generate_config):
    """A generated 8-trajectory dataset directory, shared by the whole session."""
    from services.dataset_service import generate_dataset

    path = tmp_path_factory.mktemp("data") / "tiny"
    generate_dataset(tiny_generate_config, path)
    return path


@pytest.fixture
def tiny_dataset(tiny_dataset_dir):
    from services.dataset_service import load_dataset

    return load_dataset(tiny_dataset_dir)


@pytest.fixture(scope="session")
def reach_trajectories(tiny_sim):
    """Six demonstrations of the single task reach:blue."""
    from services.dataset_service import _collect

    config = GenerateConfig(n_traj=6, seed=5, tasks=["reach:blue"], sim=tiny_sim)
    return _collect(config)


def make_trajectory(length=5, traj_id=0, image_size=4, seed=0, key="pick:red"):
    """Hand-built trajectory with random frames and distinct actions a_t = t + 0.01 * dim."""
    rng = np.random.default_rng(seed)
    actions = np.zeros((length, ACTION_DIM), dtype=np.float32)
    for t in range(length):
        actions[t, :6] = [t + 0.01 * d for d in range(6)]
        actions[t, 6] = t % 2
    frames = {
        view: rng.integers(0, 256, size=(length, image_size, image_size, 3), dtype=np.uint8)
        for view in ("static", "wrist")
    }
    return Trajectory(
        traj_id=traj_id,
        instruction=Instruction.from_key(key),
        episode_seed=seed,
        observations=frames,
        actions=actions,
        states=rng.random((length, 8)).astype(np.float32),
        poses=rng.random((length, 6)),
    )


@pytest.fixture
def hand_trajectory():
    return make_trajectory()
