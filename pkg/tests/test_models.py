"""
Tests for models - domain dataclasses
"""
import math

import numpy as np
import pytest

from models import (
    VOCABULARY,
    VOCABULARY_INDEX,
    Action,
    ActionStats,
    DatasetManifest,
    EEPose,
    FramePair,
    Instruction,
    InvDynSample,
    Trajectory,
    TrajectoryEntry,
)


class TestInstruction:
    """Test templated instructions"""

    @pytest.mark.unit
    def test_text_and_key(self):
        """Test text is a pure function of template and slots"""
        instr = Instruction("stack", ("red", "blue"))
        assert instr.text == "stack the red block on the blue block"
        assert instr.key == "stack:red:blue"
        assert instr.target_color == "blue"
        assert Instruction.from_key("stack:red:blue") == instr

    @pytest.mark.unit
    def test_place_direction(self):
        """Test place slots"""
        instr = Instruction.from_key("place:green:left")
        assert instr.direction == "left"
        assert instr.text == "put the green block on the left side"

    @pytest.mark.unit
    @pytest.mark.parametrize(
        "template,slots",
        [("fly", ("red",)), ("pick", ("purple",)), ("stack", ("red", "red")), ("place", ("red", "up")), ("reach", ())],
    )
    def test_invalid(self, template, slots):
        """Test unknown templates, slot values and arity"""
        with pytest.raises(ValueError):
            Instruction(template, slots)

    @pytest.mark.unit
    def test_vocabulary(self):
        """Test the closed vocabulary is enumerable and indexed"""
        assert len(VOCABULARY) == 4 + 12 + 16 + 4
        assert len(VOCABULARY_INDEX) == len(VOCABULARY)
        assert VOCABULARY[VOCABULARY_INDEX["reach:blue"]].key == "reach:blue"

    @pytest.mark.unit
    def test_dict_roundtrip(self):
        """Test to_dict/from_dict"""
        instr = Instruction("pick", ("yellow",))
        data = instr.to_dict()
        assert data["text"] == "pick up the yellow block"
        assert Instruction.from_dict(data) == instr


class TestActionAndPose:
    """Test action and pose conversion"""

    @pytest.mark.unit
    def test_action_array(self):
        """Test array layout [dx, dy, dz, dphi, dtheta, dpsi, g]"""
        action = Action.from_array([0.1, 0.2, 0.3, 0.0, 0.0, -0.1, 1])
        assert action.g == 1
        assert np.allclose(action.motion, [0.1, 0.2, 0.3, 0.0, 0.0, -0.1])
        assert np.allclose(action.to_array()[-1], 1.0)

    @pytest.mark.unit
    def test_action_rejects_bad_gripper(self):
        """Test non-binary gripper value"""
        with pytest.raises(ValueError):
            Action.from_array([0, 0, 0, 0, 0, 0, 0.5])

    @pytest.mark.unit
    def test_hold(self):
        """Test zero-motion hold"""
        assert np.array_equal(Action.hold(1).motion, np.zeros(6))

    @pytest.mark.unit
    def test_pose_array(self):
        """Test pose components in [x, y, z, phi, theta, psi] order"""
        pose = EEPose(0.1, 0.2, 0.3, 0.0, 0.1, -0.2)
        assert pose.as_array().tolist() == [0.1, 0.2, 0.3, 0.0, 0.1, -0.2]


class TestActionStats:
    """Test normalization"""

    @pytest.mark.unit
    def test_normalize_denormalize(self):
        """Test normalization inverts"""
        stats = ActionStats(mean=[1.0] * 6, std=[2.0] * 6, floored=[False] * 6)
        motion = np.arange(6, dtype=np.float64)
        assert np.allclose(stats.normalize(motion), (motion - 1.0) / 2.0)
        assert np.allclose(stats.denormalize(stats.normalize(motion)), motion)

    @pytest.mark.unit
    def test_zero_std_floored(self):
        """Test zero std uses the floor"""
        stats = ActionStats(mean=[0.0] * 6, std=[0.0] * 6, floored=[True] * 6, eps=1e-8)
        assert np.all(stats.safe_std == 1e-8)


class TestTrajectory:
    """Test trajectory streams"""

    @pytest.mark.unit
    def test_unequal_lengths(self, hand_trajectory):
        """Test streams must align"""
        with pytest.raises(ValueError):
            Trajectory(
                traj_id=0,
                instruction=hand_trajectory.instruction,
                episode_seed=0,
                observations=hand_trajectory.observations,
                actions=hand_trajectory.actions[:-1],
                states=hand_trajectory.states,
                poses=hand_trajectory.poses,
            )

    @pytest.mark.unit
    def test_observation(self, hand_trajectory):
        """Test per-step observation view access"""
        obs = hand_trajectory.observation(2)
        assert np.array_equal(obs["static"], hand_trajectory.observations["static"][2])
        assert obs.state is None
        assert hand_trajectory.length == 5


class TestInvDynSample:
    """Test exact sample equality"""

    @pytest.mark.unit
    def test_equals(self):
        """Test equality over every field"""
        frames = {"static": np.zeros((2, 2, 3), dtype=np.uint8)}
        chunk = np.ones((2, 7), dtype=np.float32)
        a = InvDynSample(frames, frames, chunk, False, (0, 1))
        assert a.equals(InvDynSample(frames, frames, chunk.copy(), False, (0, 1)))
        assert not a.equals(InvDynSample(frames, frames, chunk, True, (0, 1)))
        assert not a.equals(InvDynSample(frames, frames, chunk.astype(np.float64), False, (0, 1)))


class TestManifest:
    """Test manifest serialization"""

    @pytest.mark.unit
    def test_from_dict(self):
        """Test nested models are rebuilt"""
        manifest = DatasetManifest(
            format_version="sal-v1",
            seed=0,
            n_traj=1,
            tasks=["pick"],
            image_size=64,
            views=["static", "wrist"],
            action_stats=ActionStats([0.0] * 6, [1.0] * 6, [False] * 6),
            train_ids=[0],
            val_ids=[],
            trajectories=[TrajectoryEntry(0, "trajectories/000000.sal", "pick:red", 9, 42)],
        )
        rebuilt = DatasetManifest.from_dict(manifest.to_dict())
        assert rebuilt == manifest
        assert isinstance(rebuilt.action_stats, ActionStats)


class TestFramePair:
    """Test alignment pair helper"""

    @pytest.mark.unit
    def test_has_cosine(self):
        """Test undefined cosine distances"""
        assert FramePair(0, 0, 1, 1, d_cos=0.5).has_cosine
        assert not FramePair(0, 0, 1, 1, d_cos=math.nan).has_cosine
        assert not FramePair(0, 0, 1, 1).has_cosine
